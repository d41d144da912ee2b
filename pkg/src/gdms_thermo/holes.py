"""Vertex-wise holes, truncated post-critical sets and hole-preimage atoms.

A hole family fixes one center ``y_j`` per vertex (a point of the sampled
Julia set) and a radius ``R`` such that the closed disk of radius ``2R``
about ``y_j`` misses the post-critical set at ``j``.  Both checks are made
against finite approximations and are reported as heuristic.

Each leaf of the preimage tree above ``y_j`` gives an *atom*: the pulled
back hole is sandwiched between two disks by the Koebe distortion bound
with constant ``K = k(1/2)``, ``k(t) = ((1 + t) / (1 - t))**4``.
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .backward import BLOWUP_BOUND, iter_leaf_batches, julia_cloud, repelling_fixed_point
from .exceptions import BudgetExceededError, HeuristicWarning, HoleValidationError
from .model import GdmsSystem
from .poly import TOL_POLE, critical_values
from .spectral import degree_matrix
from .symbolic import partition_deg_matrix

CLOUD_TOL = 1e-3
GRID_PITCH = 1e-4
PREIMAGE_BUDGET = 10**7
REFERENCE_TREE_SIZE = 2048


def koebe_k(t: float) -> float:
    """Classical distortion bound ``((1 + t) / (1 - t))**4`` on ``D(z, t r)``."""
    return ((1.0 + t) / (1.0 - t)) ** 4


KOEBE_K = koebe_k(0.5)


@dataclass
class PostcriticalCloud:
    vertex: int
    points: np.ndarray
    depth: int
    truncated: bool = False


def _dedup(points, pitch):
    if points.size == 0:
        return points
    keys = np.stack([np.round(points.real / pitch), np.round(points.imag / pitch)], axis=1)
    _, first = np.unique(keys, axis=0, return_index=True)
    return points[np.sort(first)]


def _postcritical_levels(system, depth, budget):
    per_gen = [critical_values(g.map) for g in system.generators]
    base = [np.zeros(0, dtype=complex) for _ in range(system.n_vertices)]
    for g, cv in zip(system.generators, per_gen):
        base[g.target] = np.concatenate([base[g.target], cv])
    everything = np.concatenate(base)
    scale = max(1.0, float(np.abs(everything).max())) if everything.size else 1.0
    pitch = GRID_PITCH * scale
    levels = [[_dedup(b, pitch) for b in base]]
    truncated = False
    for _ in range(depth - 1):
        prev = levels[-1]
        nxt = []
        for j in range(system.n_vertices):
            parts = [prev[j], base[j]]
            for g in system.generators:
                if g.target != j or prev[g.source].size == 0:
                    continue
                z = prev[g.source]
                q = g.map.den(z)
                z = z[np.abs(q) >= TOL_POLE]
                img = g.map.num(z) / g.map.den(z)
                parts.append(img[np.isfinite(img) & (np.abs(img) <= BLOWUP_BOUND)])
            nxt.append(_dedup(np.concatenate(parts), pitch))
        if sum(p.size for p in nxt) > budget:
            truncated = True
            warnings.warn(
                f"post-critical approximation exceeded {budget} points; returning a partial cloud",
                HeuristicWarning,
                stacklevel=3,
            )
            break
        levels.append(nxt)
    return levels, pitch, truncated


def postcritical_approx(system: GdmsSystem, vertex, depth=8, budget=10**6) -> PostcriticalCloud:
    """Inner approximation of the post-critical set at ``vertex``.

    Collects the critical values of every ``g_xi`` with ``|xi| <= depth``
    ending at ``vertex``, by pushing the per-generator critical values
    forward; points are deduplicated on a square grid.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    v = system.vertex_index(vertex)
    levels, _, truncated = _postcritical_levels(system, depth, budget)
    return PostcriticalCloud(v, levels[-1][v], len(levels), truncated)


@dataclass
class HoleFamily:
    radius: float
    centers: tuple  # one complex center per vertex
    dist_to_cloud: tuple
    postcritical_clearance: tuple
    scale: tuple
    postcritical_depth: int
    notes: list = field(
        default_factory=lambda: [
            "HEURISTIC: clearance is measured against a truncated (inner) post-critical set",
            "HEURISTIC: centers are certified only as close to a sampled Julia cloud",
        ]
    )


def _reference_points(system, v, cloud_samples, cloud_depth, seed):
    """Repelling point, a small full preimage tree of it, then random-walk samples."""
    rp = repelling_fixed_point(system, v)
    pts = [np.array([rp.point])]
    M = degree_matrix(system, 1.0).entries
    counts = np.eye(system.n_vertices)
    k = 0
    while k < 8:
        nxt = M @ counts
        if nxt[:, v].sum() > REFERENCE_TREE_SIZE:
            break
        counts, k = nxt, k + 1
    if k:
        for batch in iter_leaf_batches(system, v, rp.point, k):
            pts.append(batch.points)
    pts.append(julia_cloud(system, v, cloud_samples, cloud_depth, seed).points)
    return np.concatenate(pts)


def _center_list(system, centers):
    if isinstance(centers, dict):
        out = [None] * system.n_vertices
        for key, val in centers.items():
            out[system.vertex_index(key)] = complex(val)
        if any(c is None for c in out):
            raise ValueError("a center is required for every vertex")
        return out
    out = [complex(c) for c in centers]
    if len(out) != system.n_vertices:
        raise ValueError("a center is required for every vertex")
    return out


def build_hole_family(
    system: GdmsSystem,
    radius: float,
    centers=None,
    *,
    cloud_samples=512,
    cloud_depth=12,
    postcritical_depth=8,
    postcritical_budget=10**6,
    seed=0,
) -> HoleFamily:
    """Validate (or choose) hole centers for radius ``radius``.

    Without ``centers`` each vertex takes the reference Julia point farthest
    from the post-critical cloud; ties go to the earliest point, which is the
    repelling fixed point when it is among the best.  Raises
    :class:`HoleValidationError` when some vertex has clearance ``<= 2R`` or a
    given center is not on the sampled Julia set.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    levels, _, _ = _postcritical_levels(system, postcritical_depth, postcritical_budget)
    pc = levels[-1]
    given = _center_list(system, centers) if centers is not None else None

    ys, dists, clears, scales = [], [], [], []
    for v in range(system.n_vertices):
        ref = _reference_points(system, v, cloud_samples, cloud_depth, seed)
        scale = max(1.0, float(np.abs(ref).max()))

        tree = cKDTree(np.c_[pc[v].real, pc[v].imag]) if pc[v].size else None

        def clearance(z):
            z = np.atleast_1d(z)
            if tree is None:
                return np.full(z.size, math.inf)
            return tree.query(np.c_[z.real, z.imag], k=1)[0]

        if given is None:
            cl = clearance(ref)
            y = ref[int(np.flatnonzero(cl >= cl.max() * (1.0 - 1e-9))[0])]
        else:
            y = given[v]
        d = float(np.abs(ref - y).min())
        c = float(clearance(y)[0])
        ys.append(complex(y))
        dists.append(d)
        clears.append(c)
        scales.append(scale)
        name = system.vertices[v]
        if d > CLOUD_TOL * scale:
            raise HoleValidationError(
                f"center {y} at vertex {name!r} is {d:.3g} away from the sampled Julia set",
                best_clearance=c,
            )
        if not c > 2.0 * radius:
            raise HoleValidationError(
                f"no valid hole at vertex {name!r} for R={radius}: post-critical clearance "
                f"{c:.6g} <= 2R = {2 * radius:.6g}; try R < {c / 2:.6g}",
                best_clearance=c,
            )
    return HoleFamily(
        float(radius), tuple(ys), tuple(dists), tuple(clears), tuple(scales), len(levels)
    )


# --------------------------------------------------------------------------
# atoms


@dataclass(frozen=True)
class HolePreimageAtom:
    word: tuple
    target_vertex: int
    center: complex
    r_inner: float
    r_outer: float
    weight: float
    log_deriv: float


def hole_preimages(system: GdmsSystem, holes: HoleFamily, delta: float, n: int, budget=PREIMAGE_BUDGET) -> list:
    """One atom per point of ``g_xi^{-1}(y_j)`` over all words of length ``n``."""
    total = partition_deg_matrix(system, n, 1.0)
    if total > budget:
        raise BudgetExceededError(f"{int(total)} hole preimages exceed the budget {budget}")
    R, K = holes.radius, KOEBE_K
    atoms = []
    for j in range(system.n_vertices):
        for batch in iter_leaf_batches(system, j, holes.centers[j], n):
            inv = np.exp(-batch.log_derivs)
            weights = np.exp(-delta * batch.log_derivs) if delta else np.ones(len(batch))
            for k in range(len(batch)):
                atoms.append(
                    HolePreimageAtom(
                        tuple(int(a) for a in batch.words[k]),
                        j,
                        complex(batch.points[k]),
                        float(R / K * inv[k]),
                        float(R * K * inv[k]),
                        float(weights[k]),
                        float(batch.log_derivs[k]),
                    )
                )
    return atoms


@dataclass(frozen=True)
class MeasureBracket:
    total_weight: float
    lower: str
    upper: str
    statement: str


def measure_bracket_report(atoms) -> MeasureBracket:
    """Sum of atom weights and the two-sided comparison it supports."""
    if not atoms:
        raise ValueError("no atoms to report on")
    total = math.fsum(a.weight for a in atoms)
    return MeasureBracket(
        total,
        f"C1 * {total!r}",
        f"C2 * {total!r}",
        (
            f"The conformal measure of the n-hole preimage lies between C1 * {total!r} and "
            f"C2 * {total!r}, where C1, C2 > 0 are system-dependent constants that are not computed."
        ),
    )


def atoms_to_csv(system: GdmsSystem, atoms) -> str:
    buf = io.StringIO()
    buf.write("word,center_re,center_im,r_inner,r_outer,weight\n")
    for a in atoms:
        buf.write(
            f"{system.word_label(a.word)},{a.center.real!r},{a.center.imag!r},"
            f"{a.r_inner!r},{a.r_outer!r},{a.weight!r}\n"
        )
    return buf.getvalue()

"""Backward orbits: preimage trees, repelling points, Julia clouds, expansion.

The preimage tree of a point ``w`` at vertex ``j`` to depth ``n`` has one
leaf per pair (word ``xi`` of length ``n`` ending at ``j``, point ``z`` with
``g_xi(z) = w``).  Leaves are produced level by level in numpy batches;
once a level grows past ``chunk`` nodes it is split and the pieces are
finished depth first, so memory stays bounded by ``depth * chunk``.

Derivative moduli are accumulated as ``log|g_xi'(z)|`` because they grow
geometrically with depth.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .exceptions import (
    BlowupError,
    HeuristicWarning,
    NoRepellingPointError,
    RootFindingError,
)
from .model import GdmsSystem, path_reachability
from .poly import TOL_POLE, Polynomial, deriv_eval, preimages_batch, roots
from .symbolic import enumerate_words

BLOWUP_BOUND = 1e6
RESIDUAL_TOL = 1e-8
REPELLING_MARGIN = 1e-6
DEFAULT_CHUNK = 1 << 15
MAX_LOOP_DEGREE = 512
_Z = Polynomial([0, 1])

_BLOWUP_MSG = (
    "backward orbit reached modulus {:.3g} > {:.3g}; the standing assumption that "
    "the Julia set lies in C (bounded) appears violated for this system"
)


@dataclass(frozen=True)
class BackwardLeaf:
    word: tuple
    point: complex
    log_deriv: float
    target_vertex: int


@dataclass
class LeafBatch:
    """A block of tree nodes sharing a depth.

    ``words[:, k]`` is letter ``k + 1`` of each word, ``vertex`` the initial
    vertex of each word (where ``point`` lives).
    """

    target_vertex: int
    target: complex
    words: np.ndarray
    points: np.ndarray
    log_derivs: np.ndarray
    vertex: np.ndarray

    def __len__(self):
        return self.points.size

    def split(self, size):
        for lo in range(0, len(self), size):
            sl = slice(lo, lo + size)
            yield LeafBatch(
                self.target_vertex,
                self.target,
                self.words[sl],
                self.points[sl],
                self.log_derivs[sl],
                self.vertex[sl],
            )

    def leaves(self):
        for k in range(len(self)):
            yield BackwardLeaf(
                tuple(int(a) for a in self.words[k]),
                complex(self.points[k]),
                float(self.log_derivs[k]),
                self.target_vertex,
            )


def _preimage_step(gen, w, bound):
    """Preimages of ``w`` under one generator: (roots (m, d), log|g'| (m, d))."""
    g = gen.map
    pts, dropped = preimages_batch(g, w)
    if dropped.size:
        raise BlowupError(_BLOWUP_MSG.format(math.inf, bound))
    big = np.abs(pts).max() if pts.size else 0.0
    if big > bound:
        raise BlowupError(_BLOWUP_MSG.format(big, bound))
    flat = pts.ravel()
    wrep = np.repeat(w, g.degree)
    fwd = g.num(flat) / g.den(flat)
    resid = np.abs(fwd - wrep) / (1.0 + np.abs(wrep))
    if np.any(resid > RESIDUAL_TOL):
        raise RootFindingError(
            f"forward residual {resid.max():.3g} exceeds {RESIDUAL_TOL}", residuals=resid
        )
    with np.errstate(divide="ignore"):
        logd = np.log(np.abs(deriv_eval(g, flat)))
    return pts, logd.reshape(pts.shape)


def _expand(system, batch, bound, letters=None):
    words, pts, logd, vert = [], [], [], []
    for gen in system.generators:
        if letters is not None and gen.index not in letters:
            continue
        mask = batch.vertex == gen.target
        if not mask.any():
            continue
        roots_, dlog = _preimage_step(gen, batch.points[mask], bound)
        d = gen.degree
        m = int(mask.sum())
        parent_words = np.repeat(batch.words[mask], d, axis=0)
        words.append(np.concatenate([np.full((m * d, 1), gen.index, dtype=np.int32), parent_words], axis=1))
        pts.append(roots_.ravel())
        logd.append((batch.log_derivs[mask][:, None] + dlog).ravel())
        vert.append(np.full(m * d, gen.source, dtype=np.int64))
    n = batch.words.shape[1] + 1
    if not pts:
        return LeafBatch(
            batch.target_vertex,
            batch.target,
            np.zeros((0, n), dtype=np.int32),
            np.zeros(0, dtype=complex),
            np.zeros(0),
            np.zeros(0, dtype=np.int64),
        )
    return LeafBatch(
        batch.target_vertex,
        batch.target,
        np.concatenate(words),
        np.concatenate(pts),
        np.concatenate(logd),
        np.concatenate(vert),
    )


def iter_leaf_batches(
    system: GdmsSystem,
    target_vertex,
    target: complex,
    depth: int,
    *,
    bound=BLOWUP_BOUND,
    chunk=DEFAULT_CHUNK,
    on_level=None,
    last_letters=None,
):
    """Yield :class:`LeafBatch` blocks covering the depth-``depth`` preimage tree.

    ``on_level(level, batch)`` is called for every intermediate block, which
    lets callers fold over all depths in one traversal.  ``last_letters``
    restricts the final letter of the words (the first backward step); it is
    how the tree is split for parallel work.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    j = system.vertex_index(target_vertex)
    root = LeafBatch(
        j,
        complex(target),
        np.zeros((1, 0), dtype=np.int32),
        np.array([complex(target)]),
        np.zeros(1),
        np.array([j]),
    )
    letters = None if last_letters is None else set(last_letters)

    def grow(batch, level):
        child = _expand(system, batch, bound, letters if level == 0 else None)
        if on_level is not None:
            on_level(level + 1, child)
        if level + 1 == depth:
            yield child
            return
        for piece in child.split(chunk):
            yield from grow(piece, level + 1)

    yield from grow(root, 0)


def preimage_tree(system: GdmsSystem, target_vertex, target: complex, depth: int, **kwargs):
    """Stream every :class:`BackwardLeaf` of the depth-``depth`` tree above ``target``."""
    for batch in iter_leaf_batches(system, target_vertex, target, depth, **kwargs):
        yield from batch.leaves()


def forward_word(system: GdmsSystem, word, z):
    """Apply ``g_xi`` letter by letter (works on arrays)."""
    for a in word:
        g = system.generators[a].map
        z = g.num(z) / g.den(z)
    return z


def word_log_deriv(system: GdmsSystem, word, z):
    """``log|g_xi'(z)|`` via the chain rule along the forward orbit."""
    total = 0.0
    for a in word:
        g = system.generators[a].map
        total = total + np.log(np.abs(deriv_eval(g, z)))
        z = g.num(z) / g.den(z)
    return total


# --------------------------------------------------------------------------
# repelling periodic points


@dataclass(frozen=True)
class RepellingPoint:
    vertex: int
    loop: tuple
    point: complex
    multiplier_modulus: float


def _polish_fixed_point(g, z, steps=4):
    for _ in range(steps):
        q = g.den(z)
        if abs(q) < TOL_POLE:
            break
        f = g.num(z) / q - z
        df = deriv_eval(g, z) - 1.0
        if df == 0:
            break
        z = z - f / df
    return z


def repelling_fixed_point(system: GdmsSystem, vertex, max_loop_len=6) -> RepellingPoint:
    """First repelling fixed point of a loop map at ``vertex``.

    Loops are scanned by increasing length (lexicographically within a
    length); within a loop the candidate with the smallest argument in
    ``[0, 2*pi)``, then smallest modulus, is returned.
    """
    return _repelling_cached(system, system.vertex_index(vertex), int(max_loop_len))


def _angle_key(z):
    angle = math.atan2(z.imag, z.real) % (2 * math.pi)
    if angle > 2 * math.pi - 1e-9:
        angle = 0.0
    return round(angle, 9)


@functools.lru_cache(maxsize=256)
def _repelling_cached(system, vertex, max_loop_len):
    for length in range(1, max_loop_len + 1):
        for loop in enumerate_words(system, length, start=vertex, end=vertex):
            if np.prod([system.generators[a].degree for a in loop]) > MAX_LOOP_DEGREE:
                continue
            g = system.word_map(loop)
            fixed_poly = g.num - g.den * _Z
            if fixed_poly.degree < 1:
                continue
            candidates = []
            for z in roots(fixed_poly):
                z = complex(_polish_fixed_point(g, complex(z)))
                if abs(g.den(z)) < TOL_POLE:
                    continue
                if abs(g.num(z) / g.den(z) - z) > RESIDUAL_TOL:
                    continue
                mult = abs(deriv_eval(g, z))
                if mult > 1.0 + REPELLING_MARGIN and abs(z) <= BLOWUP_BOUND:
                    candidates.append((_angle_key(z), abs(z), z, mult))
            if candidates:
                _, _, z, mult = min(candidates, key=lambda c: (c[0], c[1]))
                return RepellingPoint(vertex, loop, z, float(mult))
    raise NoRepellingPointError(
        f"no repelling fixed point on loops of length <= {max_loop_len} at vertex {vertex}"
    )




# --------------------------------------------------------------------------
# Julia clouds


@dataclass
class PointCloud:
    vertex: int
    points: np.ndarray
    depth: int
    seed: int

    def to_csv(self) -> str:
        return "".join(f"{float(z.real)!r},{float(z.imag)!r}\n" for z in self.points)


def make_rng(seed):
    """Counter-based generator, so independent streams are reproducible."""
    return np.random.Generator(np.random.Philox(seed))


def julia_cloud(system: GdmsSystem, vertex, samples=512, depth=12, seed=0, *, bound=BLOWUP_BOUND):
    """Sample points of ``J_vertex`` by random backward walks.

    Each walk starts at the repelling point of a vertex from which a walk of
    exactly ``depth`` backward steps can end at ``vertex``; every step picks
    an admissible generator into the current vertex uniformly (among those
    that keep the end vertex reachable) and then one of its preimages
    uniformly.  Uniform choices make this a geometric sample, not a sample
    of any conformal measure.
    """
    v = system.vertex_index(vertex)
    if samples < 1 or depth < 0:
        raise ValueError("need samples >= 1 and depth >= 0")
    rng = make_rng(seed)
    R = path_reachability(system, v, depth)
    starts = np.flatnonzero(R[depth])
    if starts.size == 0:
        raise ValueError(f"no admissible walk of length {depth} ends at vertex {v}")
    seeds = {int(j): repelling_fixed_point(system, int(j)).point for j in starts}
    cur = rng.choice(starts, size=samples)
    pts = np.array([seeds[int(j)] for j in cur], dtype=complex)

    for step in range(depth):
        remaining = depth - step - 1
        chosen = np.empty(samples, dtype=np.int64)
        for j in range(system.n_vertices):
            mask = cur == j
            if not mask.any():
                continue
            allowed = [g.index for g in system.generators if g.target == j and R[remaining, g.source]]
            chosen[mask] = np.array(allowed)[rng.integers(len(allowed), size=int(mask.sum()))]
        for gen in system.generators:
            mask = chosen == gen.index
            if not mask.any():
                continue
            roots_, _ = _preimage_step(gen, pts[mask], bound)
            pick = rng.integers(gen.degree, size=roots_.shape[0])
            pts[mask] = roots_[np.arange(roots_.shape[0]), pick]
            cur[mask] = gen.source
    return PointCloud(v, pts, depth, seed)


# --------------------------------------------------------------------------
# expansion and separation


def expansion_estimate(system: GdmsSystem, depth: int, **kwargs) -> list:
    """``lambda_n = (min |g_xi'|)^(1/n)`` over backward trees of repelling points, n = 1..depth."""
    if depth < 2:
        raise ValueError("depth must be >= 2")
    best = np.full(depth + 1, np.inf)

    def on_level(level, batch):
        if len(batch):
            best[level] = min(best[level], float(batch.log_derivs.min()))

    for v in range(system.n_vertices):
        rp = repelling_fixed_point(system, v)
        for _ in iter_leaf_batches(system, v, rp.point, depth, on_level=on_level, **kwargs):
            pass
    return [math.exp(best[n] / n) for n in range(1, depth + 1)]


@dataclass
class VSCReport:
    per_vertex: list  # dicts: vertex, pairs, min_separation, relative_separation, passed
    threshold: float
    passed: bool
    label: str = (
        "HEURISTIC: separation is measured between finite samples of the pulled-back "
        "Julia sets; it cannot certify disjointness of the sets themselves"
    )


def vsc_check(system: GdmsSystem, cloud_samples=512, depth=12, seed=0, threshold=1e-3) -> VSCReport:
    """Sampled check of the vertex-wise separation condition.

    For every vertex and every pair of distinct generators leaving it, the
    two pulled-back clouds are compared; a separation below
    ``threshold * scale`` (scale = largest modulus in the two clouds, at
    least 1) fails the vertex.
    """
    clouds = {}

    def cloud(j):
        if j not in clouds:
            clouds[j] = julia_cloud(system, j, cloud_samples, depth, seed).points
        return clouds[j]

    per_vertex = []
    for i in range(system.n_vertices):
        out = [g for g in system.generators if g.source == i]
        best, best_rel = math.inf, math.inf
        pairs = 0
        for k, g1 in enumerate(out):
            p1 = _preimage_step(g1, cloud(g1.target), BLOWUP_BOUND * BLOWUP_BOUND)[0].ravel()
            for g2 in out[k + 1 :]:
                p2 = _preimage_step(g2, cloud(g2.target), BLOWUP_BOUND * BLOWUP_BOUND)[0].ravel()
                sep, _ = cKDTree(np.c_[p2.real, p2.imag]).query(np.c_[p1.real, p1.imag], k=1)
                sep = float(sep.min())
                scale = max(1.0, float(np.abs(p1).max()), float(np.abs(p2).max()))
                pairs += 1
                if sep / scale < best_rel:
                    best, best_rel = sep, sep / scale
        per_vertex.append(
            {
                "vertex": i,
                "pairs": pairs,
                "min_separation": best,
                "relative_separation": best_rel,
                "passed": best_rel > threshold,
            }
        )
    passed = all(r["passed"] for r in per_vertex)
    if not passed:
        warnings.warn("sampled VSC check failed at some vertex", HeuristicWarning, stacklevel=2)
    return VSCReport(per_vertex, threshold, passed)

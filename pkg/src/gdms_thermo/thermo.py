"""Geometric partition sums, pressure, Bowen parameter and decay exponent.

``Z_n(u)`` is the sum of ``|g_xi'(z)|^(-u)`` over every word ``xi`` of length
``n`` and every ``z`` in ``g_xi^{-1}(y_j)``, ``j`` the terminal vertex of
``xi`` and ``y_j`` the hole center there.  The sum is taken at the centers
only, so it does not depend on the hole radius; the radius matters solely
for validation and for the Koebe enclosures of the atoms.

Sums are formed in log space (log-sum-exp with a running maximum) since the
weights span hundreds of orders of magnitude.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .backward import expansion_estimate, iter_leaf_batches
from .exceptions import BowenError, BudgetExceededError
from .holes import PREIMAGE_BUDGET, HoleFamily
from .model import GdmsSystem, graph_period
from .spectral import topological_entropy
from .symbolic import partition_deg_matrix

DEFAULT_DEPTH = 10
DEFAULT_TOL_U = 1e-6
U_MAX = 64.0
RATE_DISAGREEMENT = 0.05
FLOOR_SLACK = 0.05
R_FREE_NOTE = (
    "Z_n^geom is evaluated at the hole centers only; it does not depend on the radius R, "
    "which enters through hole validation and the Koebe enclosures"
)


def default_threads():
    env = os.environ.get("GDMS_THREADS")
    if env:
        return max(1, int(env))
    return 1


def log_sum_exp(x) -> float:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return -math.inf
    m = float(x.max())
    if not math.isfinite(m):
        return m
    return m + math.log(float(np.sum(np.exp(x - m))))


def collect_log_derivs(system: GdmsSystem, holes: HoleFamily, levels, *, budget=PREIMAGE_BUDGET, threads=None):
    """``{n: array of log|g_xi'(z)|}`` over all hole preimages, for each ``n`` in ``levels``.

    One traversal per (terminal vertex, last letter) pair serves every
    requested level; pairs are processed on a thread pool and reassembled
    in a fixed order, so the result does not depend on ``threads``.
    """
    levels = sorted(set(int(n) for n in levels))
    if not levels or levels[0] < 1:
        raise ValueError("levels must be positive integers")
    top = levels[-1]
    total = partition_deg_matrix(system, top, 1.0)
    if total > budget:
        raise BudgetExceededError(f"{int(total)} preimages at depth {top} exceed the budget {budget}")
    wanted = set(levels)
    tasks = [(j, g.index) for j in range(system.n_vertices) for g in system.generators if g.target == j]

    def run(task):
        j, alpha = task
        found = {n: [] for n in levels}

        def on_level(level, batch):
            if level in wanted and level < top:
                found[level].append(batch.log_derivs)

        for batch in iter_leaf_batches(
            system, j, holes.centers[j], top, on_level=on_level, last_letters=(alpha,)
        ):
            found[top].append(batch.log_derivs)
        return found

    threads = threads or default_threads()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]
    return {n: np.concatenate([a for r in results for a in r[n]] or [np.zeros(0)]) for n in levels}


def _log_z(log_derivs, u):
    if u == 0:
        return math.log(log_derivs.size) if log_derivs.size else -math.inf
    return log_sum_exp(-u * log_derivs)


@dataclass(frozen=True)
class GeomPartitionRow:
    n: int
    u: float
    log_Z: float

    @property
    def pressure_hat(self) -> float:
        return self.log_Z / self.n


def geom_partition(system: GdmsSystem, holes: HoleFamily, u: float, n: int, **kwargs) -> GeomPartitionRow:
    """``log Z_n(u)`` from the full set of hole preimages of length ``n``."""
    L = collect_log_derivs(system, holes, [n], **kwargs)[n]
    return GeomPartitionRow(int(n), float(u), _log_z(L, u))


def pressure_function(system: GdmsSystem, holes: HoleFamily, u: float, n: int, **kwargs) -> float:
    """Finite-depth pressure estimate ``(1/n) log Z_n(u)``."""
    return geom_partition(system, holes, u, n, **kwargs).pressure_hat


@dataclass
class BowenEstimate:
    delta_hat: float
    depth: int
    bracket: tuple
    residual: float
    estimator: str
    step: int


def pressure_estimator(system, holes, depth, *, estimator="increment", step=None, **kwargs):
    """Return ``(P(u) callable, step)`` for the chosen finite-depth estimator.

    ``"mean"`` is ``(1/depth) log Z_depth(u)``.  ``"increment"`` is
    ``(log Z_depth(u) - log Z_{depth-step}(u)) / step`` with ``step`` the
    graph period by default; it cancels the bounded additive offset of
    ``log Z_n`` (e.g. the factor from summing over terminal vertices) and is
    exact on systems with constant derivative modulus on the Julia set.
    """
    if estimator == "mean":
        L = collect_log_derivs(system, holes, [depth], **kwargs)[depth]
        return (lambda u: _log_z(L, u) / depth), depth
    if estimator != "increment":
        raise ValueError(f"unknown estimator {estimator!r}")
    step = graph_period(system) if step is None else int(step)
    if not 1 <= step < depth:
        raise ValueError(f"need 1 <= step < depth, got step={step}, depth={depth}")
    got = collect_log_derivs(system, holes, [depth - step, depth], **kwargs)
    hi, lo = got[depth], got[depth - step]
    return (lambda u: (_log_z(hi, u) - _log_z(lo, u)) / step), step


def bowen_parameter(
    system: GdmsSystem,
    holes: HoleFamily,
    depth=DEFAULT_DEPTH,
    tol_u=DEFAULT_TOL_U,
    *,
    estimator="increment",
    step=None,
    u_max=U_MAX,
    **kwargs,
) -> BowenEstimate:
    """Zero of the finite-depth pressure estimate by doubling and bisection."""
    P, step = pressure_estimator(system, holes, depth, estimator=estimator, step=step, **kwargs)
    p0 = P(0.0)
    if not p0 > 0:
        raise BowenError(f"pressure at u=0 is {p0:.6g}; expected a positive value")
    lo, hi = 0.0, 1.0
    while P(hi) >= 0:
        lo, hi = hi, 2.0 * hi
        if hi > u_max:
            raise BowenError(f"no sign change of the pressure for u <= {u_max}; input is not expanding")
    grid = np.linspace(0.0, hi, 33)
    vals = np.array([P(u) for u in grid])
    if np.any(np.diff(vals) >= 0):
        raise BowenError(
            "pressure estimate is not strictly decreasing; derivative moduli below 1 on backward orbits "
            "(expansion along fibres violated)"
        )
    while hi - lo > tol_u:
        mid = 0.5 * (lo + hi)
        if P(mid) > 0:
            lo = mid
        else:
            hi = mid
    delta = 0.5 * (lo + hi)
    return BowenEstimate(delta, int(depth), (lo, hi), abs(P(delta)), estimator, step)


@dataclass
class GeomPressure:
    delta: float
    slope: float
    intercept: float
    ns: list
    log_Z: list
    last_rate: float
    tail_rate: float
    flags: list = field(default_factory=list)


def _window_ns(n_window, step):
    lo, hi = n_window
    if not 2 <= lo < hi:
        raise ValueError("window must satisfy 2 <= lo < hi")
    ns = list(range(lo, hi + 1, step))
    if len(ns) < 2:
        raise ValueError(f"window {lo}:{hi} with step {step} holds fewer than two depths")
    return ns


def geom_pressure(
    system: GdmsSystem, holes: HoleFamily, delta: float, n_window, *, step=None, **kwargs
) -> GeomPressure:
    """Exponential growth rate of ``Z_n(delta)`` over a window of depths.

    The main estimate is the least-squares slope of ``log Z_n`` against
    ``n``.  Also reported: ``(1/n_hi) log Z_{n_hi}`` and the largest
    per-step increment over the window (a tail estimate of the limsup); a
    disagreement above 0.05 between slope and tail rate is flagged.
    ``step`` defaults to the graph period.
    """
    step = graph_period(system) if step is None else int(step)
    ns = _window_ns(n_window, step)
    got = collect_log_derivs(system, holes, ns, **kwargs)
    logz = [_log_z(got[n], delta) for n in ns]
    slope, intercept = np.polyfit(np.array(ns, dtype=float), np.array(logz), 1)
    increments = [(b - a) / step for a, b in zip(logz, logz[1:])]
    gp = GeomPressure(
        float(delta),
        float(slope),
        float(intercept),
        ns,
        logz,
        logz[-1] / ns[-1],
        float(max(increments)),
    )
    if abs(gp.slope - gp.tail_rate) > RATE_DISAGREEMENT:
        gp.flags.append(
            f"regression slope {gp.slope:.6g} and tail rate {gp.tail_rate:.6g} differ by more than "
            f"{RATE_DISAGREEMENT}"
        )
    return gp


@dataclass
class DecayReport:
    exponent: float
    entropy: float
    geom: GeomPressure
    lambda_hat: float
    floor: float
    tail_exponent: float
    warnings: list = field(default_factory=list)
    note: str = R_FREE_NOTE


def decay_exponent(
    system: GdmsSystem,
    holes: HoleFamily,
    delta: float,
    n_window,
    *,
    step=None,
    lambda_hat=None,
    **kwargs,
) -> DecayReport:
    """Decay exponent ``log rho(M) - geometric pressure(delta)``.

    The report carries the positivity floor ``delta * log(lambda)`` with
    ``lambda`` sampled at the top of the window unless ``lambda_hat`` is given.
    """
    entropy = topological_entropy(system)
    gp = geom_pressure(system, holes, delta, n_window, step=step, **kwargs)
    lam = lambda_hat if lambda_hat is not None else expansion_estimate(system, max(2, n_window[1]))[-1]
    floor = delta * math.log(lam)
    rep = DecayReport(entropy - gp.slope, entropy, gp, lam, floor, entropy - gp.tail_rate)
    rep.warnings.extend(gp.flags)
    if not rep.exponent > 0:
        rep.warnings.append(f"decay exponent {rep.exponent:.6g} is not positive")
    if rep.exponent < floor - FLOOR_SLACK:
        rep.warnings.append(
            f"decay exponent {rep.exponent:.6g} is below the expansion floor {floor:.6g} "
            "(estimator inconsistency)"
        )
    return rep

"""Degree matrices, Perron-Frobenius data, canonical weights and entropy.

Everything here is closed-form once the Perron eigenpair of the degree
matrix ``M^(t)`` is known, so the entropy identity can be checked to machine
precision instead of by sampling orbits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceError, NotIrreducibleError
from .model import GdmsSystem, check_irreducible

PERRON_TOL = 1e-13
PERRON_MAX_ITERS = 100_000
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class DegreeMatrix:
    t: float
    entries: np.ndarray


@dataclass(frozen=True)
class PerronData:
    """Spectral radius with left/right positive eigenvectors, each summing to 1."""

    rho: float
    left: np.ndarray
    right: np.ndarray


@dataclass(frozen=True)
class WeightFamily:
    t: float
    a: np.ndarray  # indexed by generator
    rho: float
    left: np.ndarray


@dataclass(frozen=True)
class VertexDistribution:
    c: np.ndarray
    residual: float


def degree_matrix(system: GdmsSystem, t: float) -> DegreeMatrix:
    """``M[i, j] = sum of deg(g)^t over generators i -> j``."""
    M = np.zeros((system.n_vertices, system.n_vertices))
    np.add.at(M, (system.sources, system.targets), system.degrees**t)
    return DegreeMatrix(float(t), M)


def _pattern_period(M):
    """Period of the directed graph of ``M > 0`` (assumed strongly connected)."""
    A = M > 0
    level = {0: 0}
    queue = [0]
    for i in queue:
        for j in np.flatnonzero(A[i]):
            if int(j) not in level:
                level[int(j)] = level[i] + 1
                queue.append(int(j))
    period = 0
    for i, j in zip(*np.nonzero(A)):
        period = math.gcd(period, level[int(i)] + 1 - level[int(j)])
    return max(period, 1)


def _is_strongly_connected(M):
    A = M > 0
    n = A.shape[0]
    R = np.eye(n, dtype=bool) | A
    for _ in range(max(1, int(math.ceil(math.log2(max(n, 2)))))):
        R = R | ((R.astype(np.int64) @ R.astype(np.int64)) > 0)
    return bool(R.all())


def _power_iteration(M, shift, max_iters, tol):
    """Sum-normalised power iteration; stops when the vector settles."""
    n = M.shape[0]
    S = M + shift * np.eye(n)
    v = np.full(n, 1.0 / n)
    for _ in range(max_iters):
        w = S @ v
        rho = w.sum()
        w = w / rho
        if np.abs(w - v).max() < tol:
            return rho - shift, w
        v = w
    return None


def _polish(M, rho, v):
    """One inverse-iteration step with a slightly perturbed shift."""
    n = M.shape[0]
    try:
        x = np.linalg.solve(M - rho * (1.0 + 1e-9) * np.eye(n), v)
    except np.linalg.LinAlgError:
        return rho, v
    x = np.abs(x) / np.abs(x).sum()
    Mx = M @ x
    return float(Mx.sum() / x.sum()), x


def perron(matrix, *, max_iters=PERRON_MAX_ITERS, tol=PERRON_TOL) -> PerronData:
    """Perron eigenpair of a nonnegative irreducible matrix by power iteration.

    Periodic patterns never converge without help, so their iteration runs
    on ``M + eps*I`` with ``eps`` equal to the largest row sum; the shift is
    subtracted from the eigenvalue afterwards.  The same shift is used as a
    fallback when the plain iteration stalls.  A final inverse-iteration
    step brings both vectors to working precision.
    """
    M = np.asarray(matrix.entries if isinstance(matrix, DegreeMatrix) else matrix, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("perron needs a square matrix")
    if np.any(M < 0):
        raise ValueError("perron needs a nonnegative matrix")
    if not _is_strongly_connected(M):
        raise NotIrreducibleError("matrix is not irreducible")
    n = M.shape[0]
    if n == 1:
        one = np.ones(1)
        return PerronData(float(M[0, 0]), one, one)

    row_max = float(M.sum(axis=1).max())
    shifts = [row_max] if _pattern_period(M) > 1 else [0.0, row_max]
    for shift in shifts:
        right = _power_iteration(M, shift, max_iters, tol)
        left = _power_iteration(M.T, shift, max_iters, tol) if right is not None else None
        if right is not None and left is not None:
            break
    else:
        raise ConvergenceError("power iteration did not converge, even with a diagonal shift")
    rho, v = _polish(M, *right)
    _, u = _polish(M.T, *left)
    res_r = np.abs(M @ v - rho * v).max()
    res_l = np.abs(u @ M - rho * u).max()
    if max(res_r, res_l) > RESIDUAL_TOL * rho:
        raise ConvergenceError(f"Perron residuals {res_r:.3g}, {res_l:.3g} exceed tolerance")
    return PerronData(float(rho), u, v)


def _require_irreducible(system):
    if not check_irreducible(system):
        raise NotIrreducibleError("system is not irreducible")


def canonical_weights(system: GdmsSystem, t: float) -> WeightFamily:
    """``a_alpha = deg^t u_source / (rho u_target)`` for the left Perron vector ``u``."""
    _require_irreducible(system)
    pd = perron(degree_matrix(system, t))
    u = pd.left
    a = system.degrees**t * u[system.sources] / (pd.rho * u[system.targets])
    return WeightFamily(float(t), a, pd.rho, u)


def weight_sums(system: GdmsSystem, weights: WeightFamily) -> np.ndarray:
    """Sum of the weights over generators ending at each vertex (should be all ones)."""
    out = np.zeros(system.n_vertices)
    np.add.at(out, system.targets, weights.a)
    return out


def topological_entropy(system: GdmsSystem) -> float:
    """``log rho(M)`` for the unit-temperature degree matrix."""
    _require_irreducible(system)
    return math.log(perron(degree_matrix(system, 1.0)).rho)


def log_spectral_radius(system: GdmsSystem, t: float) -> float:
    _require_irreducible(system)
    return math.log(perron(degree_matrix(system, t)).rho)


def vertex_stationary(system: GdmsSystem, weights: WeightFamily) -> VertexDistribution:
    """Fixed point ``c = Bc`` with ``B[i, j] = sum of a over generators i -> j``, sum(c) = 1."""
    _require_irreducible(system)
    B = np.zeros((system.n_vertices, system.n_vertices))
    np.add.at(B, (system.sources, system.targets), weights.a)
    c = perron(B).right
    residual = float(np.abs(B @ c - c).max())
    if residual > RESIDUAL_TOL:
        raise ConvergenceError(f"stationary vertex distribution residual {residual:.3g}")
    return VertexDistribution(c, residual)


def entropy_identity_terms(system: GdmsSystem, t: float) -> dict:
    """Closed-form terms of the entropy identity at inverse temperature ``t``.

    ``h`` is the conditional entropy of the canonical measure,
    ``E`` the mean log-degree; the identity reads
    ``h + (t - 1) E = log rho(M^(t))``.
    """
    w = canonical_weights(system, t)
    c = vertex_stationary(system, w).c
    a = w.a
    logd = np.log(system.degrees)
    ct = c[system.targets]
    h = float(np.sum(ct * (-a * np.log(a) + a * logd)))
    E = float(np.sum(ct * a * logd))
    log_rho = math.log(w.rho)
    return {
        "t": float(t),
        "h": h,
        "E": E,
        "log_rho": log_rho,
        "residual": abs(h + (t - 1.0) * E - log_rho),
    }


def entropy_identity_residual(system: GdmsSystem, t: float) -> float:
    return entropy_identity_terms(system, t)["residual"]

"""Complex polynomials and rational maps.

Polynomials store their coefficients in ascending order of power.  Roots are
found with Aberth-Ehrlich simultaneous iteration, vectorised over a batch of
polynomials of equal degree so that whole levels of a preimage tree can be
solved in one call.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import DegreeDropWarning, MultiplicityWarning, PoleError, RootFindingError

TOL_POLE = 1e-12
TOL_COPRIME = 1e-8
CLUSTER_TOL = 1e-7
DEFAULT_ROOT_TOL = 1e-9
MAX_ROOT_ITERS = 200

_EPS = np.finfo(float).eps
# Angular offset of the starting circle; irrational so no start point lands on a symmetry axis.
_START_ANGLE = math.pi * (math.sqrt(5.0) - 1.0) / 2.0


def _trim(coeffs):
    coeffs = [complex(c) for c in coeffs]
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    if not coeffs:
        coeffs = [0j]
    return tuple(coeffs)


@dataclass(frozen=True)
class Polynomial:
    """A complex polynomial, coefficients ascending by power."""

    coeffs: tuple

    def __init__(self, coeffs):
        object.__setattr__(self, "coeffs", _trim(coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.degree == 0 and self.coeffs[0] == 0

    def array(self, length=None) -> np.ndarray:
        """Coefficients as a complex array, zero padded to ``length``."""
        out = np.array(self.coeffs, dtype=complex)
        if length is not None and length > out.size:
            out = np.concatenate([out, np.zeros(length - out.size, dtype=complex)])
        return out

    def __call__(self, z):
        if np.ndim(z) == 0:
            acc = 0j
            for c in reversed(self.coeffs):
                acc = acc * z + c
            return acc
        z = np.asarray(z, dtype=complex)
        acc = np.zeros_like(z)
        for c in reversed(self.coeffs):
            acc = acc * z + c
        return acc

    def deriv(self) -> "Polynomial":
        if self.degree == 0:
            return Polynomial([0])
        return Polynomial([k * c for k, c in enumerate(self.coeffs) if k > 0])

    def __add__(self, other):
        n = max(len(self.coeffs), len(other.coeffs))
        return Polynomial(self.array(n) + other.array(n))

    def __sub__(self, other):
        n = max(len(self.coeffs), len(other.coeffs))
        return Polynomial(self.array(n) - other.array(n))

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            return Polynomial(np.convolve(self.array(), other.array()))
        return Polynomial(self.array() * complex(other))

    __rmul__ = __mul__

    def max_abs_coeff(self) -> float:
        return max(abs(c) for c in self.coeffs)


@dataclass(frozen=True)
class RationalMap:
    """A non-constant rational map ``P/Q``.

    Raises ``ValueError`` if ``Q`` vanishes identically, if the map is
    constant, or if ``P`` and ``Q`` share a root (within ``TOL_COPRIME``).
    """

    num: Polynomial
    den: Polynomial

    def __init__(self, num, den=(1,)):
        num = num if isinstance(num, Polynomial) else Polynomial(num)
        den = den if isinstance(den, Polynomial) else Polynomial(den)
        if den.is_zero:
            raise ValueError("zero denominator polynomial")
        if max(num.degree, den.degree) < 1 or num.is_zero:
            raise ValueError("rational map must be non-constant (degree >= 1)")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        if num.degree >= 1 and den.degree >= 1:
            rp, rq = roots(num), roots(den)
            gap = np.min(np.abs(rp[:, None] - rq[None, :]))
            if gap < TOL_COPRIME:
                raise ValueError(f"numerator and denominator share a root (gap {gap:.3g})")

    @classmethod
    def monomial(cls, d, scale=1.0):
        return cls([0] * d + [scale])

    @property
    def degree(self) -> int:
        return max(self.num.degree, self.den.degree)

    @property
    def is_polynomial(self) -> bool:
        return self.den.degree == 0

    def __call__(self, z):
        return eval_map(self, z)

    def deriv_numerator(self) -> Polynomial:
        """``P'Q - PQ'``; its roots are the finite critical points."""
        return self.num.deriv() * self.den - self.num * self.den.deriv()

    def compose(self, inner: "RationalMap") -> "RationalMap":
        """Return ``self o inner``."""
        return compose(self, inner)


def eval_map(g: RationalMap, z):
    """Evaluate ``g`` at ``z`` (scalar or array); raise :class:`PoleError` near a pole."""
    q = g.den(z)
    if np.any(np.abs(q) < TOL_POLE):
        raise PoleError(f"pole of the rational map at z={z!r}; the orbit has left C")
    return g.num(z) / q


def deriv_eval(g: RationalMap, z):
    """Derivative of ``g`` at ``z`` in the Euclidean coordinate."""
    q = g.den(z)
    if np.any(np.abs(q) < TOL_POLE):
        raise PoleError(f"pole of the rational map at z={z!r}; the orbit has left C")
    if g.is_polynomial:
        return g.num.deriv()(z) / q
    return (g.num.deriv()(z) * q - g.num(z) * g.den.deriv()(z)) / (q * q)


def compose(outer: RationalMap, inner: RationalMap) -> RationalMap:
    """Composition ``outer o inner`` as a new rational map."""
    d = outer.degree
    a, b = inner.num.array(), inner.den.array()
    a_pow = [np.ones(1, dtype=complex)]
    b_pow = [np.ones(1, dtype=complex)]
    for _ in range(d):
        a_pow.append(np.convolve(a_pow[-1], a))
        b_pow.append(np.convolve(b_pow[-1], b))

    def lift(p):
        pc = p.array(d + 1)
        acc = np.zeros(1, dtype=complex)
        for k in range(d + 1):
            if pc[k] == 0:
                continue
            term = pc[k] * np.convolve(a_pow[k], b_pow[d - k])
            if term.size > acc.size:
                acc = np.concatenate([acc, np.zeros(term.size - acc.size, dtype=complex)])
            acc[: term.size] += term
        return Polynomial(acc)

    num, den = lift(outer.num), lift(outer.den)
    if den.degree == 0:
        num = Polynomial(num.array() / den.coeffs[0])
        den = Polynomial([1])
    composed = object.__new__(RationalMap)
    object.__setattr__(composed, "num", num)
    object.__setattr__(composed, "den", den)
    return composed


def mobius_matrix(g: RationalMap) -> np.ndarray:
    """The 2x2 matrix ``[[a, b], [c, d]]`` of a degree-one map ``(az+b)/(cz+d)``."""
    if g.degree != 1:
        raise ValueError("mobius_matrix needs a degree-one map")
    b, a = g.num.array(2)
    d, c = g.den.array(2)
    return np.array([[a, b], [c, d]], dtype=complex)


# --------------------------------------------------------------------------
# root finding


def _horner(c, z):
    """Evaluate rows of ``c`` (ascending) at the matching rows of ``z``."""
    acc = np.broadcast_to(c[:, -1:], z.shape).astype(complex)
    for i in range(c.shape[1] - 2, -1, -1):
        acc = acc * z + c[:, i : i + 1]
    return acc


def fujiwara_bound(monic):
    """Fujiwara upper bound on the root moduli of monic rows (ascending)."""
    d = monic.shape[1] - 1
    k = np.arange(1, d + 1)
    terms = np.abs(monic[:, d - k]) ** (1.0 / k)
    terms[:, -1] = (np.abs(monic[:, 0]) / 2.0) ** (1.0 / d)
    return 2.0 * terms.max(axis=1)


def aberth_batch(coeffs, *, max_iters=MAX_ROOT_ITERS, tol=DEFAULT_ROOT_TOL, merge=True):
    """All roots of a batch of polynomials of a common degree.

    Parameters
    ----------
    coeffs : array_like, shape (B, d+1)
        Ascending coefficients; the leading column must be nonzero.

    Returns
    -------
    roots : ndarray, shape (B, d)
        Roots with multiplicity.  Clustered roots are averaged when ``merge``.
    merged : ndarray of bool, shape (B,)
        Rows in which a cluster was merged.
    """
    c = np.atleast_2d(np.asarray(coeffs, dtype=complex))
    nrows, d = c.shape[0], c.shape[1] - 1
    if d < 1:
        raise ValueError("degree must be at least 1")
    if np.any(c[:, -1] == 0):
        raise ValueError("leading coefficient must be nonzero")
    monic = c / c[:, -1:]
    if d == 1:
        return -monic[:, :1], np.zeros(nrows, dtype=bool)

    dmonic = monic[:, 1:] * np.arange(1, d + 1)
    absmonic = np.abs(monic)
    radius = fujiwara_bound(monic)
    radius[radius == 0] = 1.0
    k = np.arange(d)
    start = np.exp(1j * (2 * np.pi * k / d + _START_ANGLE)) * (1.0 + 0.01 * k / d)
    z = radius[:, None] * start[None, :]

    active = np.arange(nrows)
    offdiag = ~np.eye(d, dtype=bool)
    for _ in range(max_iters):
        if active.size == 0:
            break
        za = z[active]
        p = _horner(monic[active], za)
        dp = _horner(dmonic[active], za)
        noise = _horner(absmonic[active], np.abs(za)).real * (8 * _EPS)
        done = np.all(np.abs(p) <= noise, axis=1)
        diff = za[:, :, None] - za[:, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(offdiag, 1.0 / np.where(offdiag, diff, 1.0), 0.0)
            sigma = inv.sum(axis=2)
            ratio = dp / p
            step = 1.0 / (ratio - sigma)
        step = np.where((p == 0) | ~np.isfinite(step), 0.0, step)
        small = np.all(np.abs(step) <= 4 * _EPS * (1.0 + np.abs(za)), axis=1)
        z[active] = za - step
        active = active[~(done | small)]

    scale = np.abs(c).max(axis=1)[:, None] * np.maximum(1.0, np.abs(z)) ** d
    resid = np.abs(_horner(c, z)) / scale
    bad = np.any(resid > tol, axis=1) | ~np.all(np.isfinite(z), axis=1)
    if np.any(bad):
        raise RootFindingError(
            f"Aberth iteration did not converge for {int(bad.sum())} of {nrows} polynomials",
            residuals=resid[bad],
        )

    merged = np.zeros(nrows, dtype=bool)
    if merge:
        dist = np.abs(z[:, :, None] - z[:, None, :])
        close = (dist < CLUSTER_TOL * (1.0 + np.abs(z[:, :, None]))) & offdiag
        for row in np.flatnonzero(close.any(axis=(1, 2))):
            z[row] = _merge_clusters(z[row], close[row])
            merged[row] = True
    return z, merged


def _merge_clusters(zrow, close):
    labels = np.arange(zrow.size)
    for i, j in zip(*np.nonzero(close)):
        li, lj = labels[i], labels[j]
        if li != lj:
            labels[labels == lj] = li
    out = zrow.copy()
    for lab in np.unique(labels):
        members = labels == lab
        out[members] = zrow[members].mean()
    return out


def roots(p: Polynomial, tol=DEFAULT_ROOT_TOL, max_iters=MAX_ROOT_ITERS) -> np.ndarray:
    """Roots of ``p`` with multiplicity (exactly ``deg p`` of them)."""
    if p.degree < 1:
        raise ValueError("roots() needs a polynomial of degree >= 1")
    c = p.array()
    nzero = 0
    while c[nzero] == 0:
        nzero += 1
    out = [np.zeros(nzero, dtype=complex)]
    if c.size - nzero > 1:
        found, _ = aberth_batch(c[None, nzero:], tol=tol, max_iters=max_iters)
        out.append(found[0])
    return np.concatenate(out)


def preimages(g: RationalMap, w: complex, return_infinity=False):
    """Solutions of ``g(z) = w`` in C.

    When ``P - wQ`` loses degree the missing preimages are at infinity; a
    :class:`DegreeDropWarning` is issued and, with ``return_infinity``, the
    count is returned alongside the finite points.
    """
    d = g.degree
    poly = g.num - g.den * w
    lead_tol = TOL_POLE * max(1.0, poly.max_abs_coeff())
    c = poly.array(d + 1)
    eff = d
    while eff > 0 and abs(c[eff]) <= lead_tol:
        eff -= 1
    at_inf = d - eff
    if at_inf:
        warnings.warn(f"{at_inf} preimage(s) of w={w!r} at infinity", DegreeDropWarning, stacklevel=2)
    pts = roots(Polynomial(c[: eff + 1])) if eff >= 1 else np.zeros(0, dtype=complex)
    if return_infinity:
        return pts, at_inf
    return pts


def preimages_batch(g: RationalMap, w):
    """Preimages of every entry of ``w`` under ``g``; shape (len(w), deg g).

    Raises :class:`RootFindingError` through the root finder; returns the
    indices of rows where the degree dropped (preimages at infinity) so the
    caller can decide.  Those rows are filled with ``inf``.
    """
    w = np.asarray(w, dtype=complex).ravel()
    d = g.degree
    P = g.num.array(d + 1)
    Q = g.den.array(d + 1)
    c = P[None, :] - w[:, None] * Q[None, :]
    lead = np.abs(c[:, -1])
    drop = lead <= TOL_POLE * np.maximum(1.0, np.abs(c).max(axis=1))
    out = np.full((w.size, d), np.inf + 0j)
    merged = np.zeros(w.size, dtype=bool)
    ok = ~drop
    if np.any(ok):
        out[ok], merged[ok] = aberth_batch(c[ok])
    if np.any(merged):
        warnings.warn(
            f"{int(merged.sum())} target(s) near critical values; clustered preimages merged",
            MultiplicityWarning,
            stacklevel=2,
        )
    return out, np.flatnonzero(drop)


def critical_points(g: RationalMap) -> np.ndarray:
    """Finite critical points of ``g`` with multiplicity."""
    dn = g.deriv_numerator()
    if dn.degree < 1:
        return np.zeros(0, dtype=complex)
    return roots(dn)


def critical_values(g: RationalMap) -> np.ndarray:
    """Images of the finite critical points that are not poles."""
    crit = critical_points(g)
    if crit.size == 0:
        return crit
    q = np.abs(g.den(crit))
    crit = crit[q >= TOL_POLE]
    return g.num(crit) / g.den(crit)

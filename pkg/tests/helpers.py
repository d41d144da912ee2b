"""Shared test systems and random system generators."""

from __future__ import annotations

import numpy as np

from gdms_thermo import RationalMap, build_system
from gdms_thermo.model import check_irreducible


def z_power(d):
    return build_system(["v"], [("v", "v", [RationalMap.monomial(d)])])


def deg23():
    return build_system(["v"], [("v", "v", [RationalMap.monomial(2), RationalMap.monomial(3)])])


def two_vertex():
    return build_system(["1", "2"], [("1", "2", [RationalMap.monomial(2)]), ("2", "1", [RationalMap.monomial(3)])])


def three_cycle():
    z2 = RationalMap.monomial(2)
    return build_system(["a", "b", "c"], [("a", "b", [z2]), ("b", "c", [z2]), ("c", "a", [z2])])


NAMED = {
    "z2": lambda: z_power(2),
    "z3": lambda: z_power(3),
    "z4": lambda: z_power(4),
    "deg23": deg23,
    "two_vertex": two_vertex,
    "three_cycle": three_cycle,
}


def _small_complex(rng, r):
    return complex(*rng.uniform(-r, r, 2))


def random_map(rng, degree, rational=False):
    """``z^d + c`` or, with ``rational``, ``(z^d + c) / (1 + b z)``, small ``b`` and ``c``."""
    c = _small_complex(rng, 0.2)
    num = [c] + [0] * (degree - 1) + [1]
    if degree == 1:
        num = [c, 2.0]  # expanding affine map
    if rational and degree >= 2:
        b = _small_complex(rng, 0.05)
        return RationalMap(num, [1, b])
    return RationalMap(num)


def random_system(rng, max_vertices=3, max_generators=4, min_degree=1, max_degree=4, rational_prob=0.0):
    """Random irreducible system with at most ``max_generators`` generators.

    A directed cycle through every vertex guarantees irreducibility; the
    remaining generators land on random edges (new or existing).
    """
    while True:
        nv = int(rng.integers(1, max_vertices + 1))
        ng = int(rng.integers(nv, max_generators + 1))
        names = [f"v{k}" for k in range(nv)]
        perm = rng.permutation(nv)
        pairs = [(int(perm[k]), int(perm[(k + 1) % nv])) for k in range(nv)]
        for _ in range(ng - nv):
            pairs.append((int(rng.integers(nv)), int(rng.integers(nv))))
        grouped = {}
        for s, t in pairs:
            deg = int(rng.integers(min_degree, max_degree + 1))
            grouped.setdefault((s, t), []).append(random_map(rng, deg, rng.random() < rational_prob))
        edges = [(names[s], names[t], maps) for (s, t), maps in grouped.items()]
        system = build_system(names, edges)
        if check_irreducible(system):
            return system


def random_systems(seed, count, **kwargs):
    rng = np.random.default_rng(seed)
    return [random_system(rng, **kwargs) for _ in range(count)]


def brute_irreducible(system):
    """Reachability by repeated boolean squaring of the adjacency pattern."""
    nv = system.n_vertices
    A = np.zeros((nv, nv), dtype=bool)
    for e in system.edges:
        A[e.source, e.target] = True
    R = A | np.eye(nv, dtype=bool)
    for _ in range(nv):
        R = (R.astype(int) @ R.astype(int)) > 0
    return bool(np.all(R))


def power_sum(system, n, t):
    """Oracle ``1^T M^n 1`` by explicit summation over generators (no library call)."""
    nv = system.n_vertices
    M = np.zeros((nv, nv))
    for g in system.generators:
        M[g.source, g.target] += float(g.degree) ** t
    v = np.ones(nv)
    for _ in range(n):
        v = M @ v
    return float(v.sum())

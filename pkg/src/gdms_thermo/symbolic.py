"""Admissible words and degree partition functions.

A word is a tuple of generator indices ``(a_1, ..., a_n)`` with
``target(a_k) == source(a_{k+1})``.  The brute-force partition sum walks the
words explicitly; :func:`partition_deg_matrix` is the independent closed form
``1^T (M^(t))^n 1`` it is checked against.
"""

from __future__ import annotations

import math

import numpy as np

from .exceptions import BudgetExceededError
from .model import GdmsSystem, generator_counts
from .spectral import degree_matrix, log_spectral_radius

WORD_BUDGET = 10**7
_CHUNK = 1 << 16


def _out_generators(system):
    out = [[] for _ in range(system.n_vertices)]
    for g in system.generators:
        out[g.source].append(g.index)
    return out


def enumerate_words(system: GdmsSystem, n: int, start=None, end=None):
    """Yield every admissible word of length ``n`` in lexicographic order.

    ``start``/``end`` filter on the initial vertex of the first letter and
    the terminal vertex of the last one.  Branches that cannot reach ``end``
    in the remaining number of letters are pruned.
    """
    if n < 1:
        raise ValueError("word length must be >= 1")
    out = _out_generators(system)
    gens = system.generators
    if end is not None:
        end = system.vertex_index(end)
        # backward[k][i]: some word of length k leads from i to end
        A = (generator_counts(system) > 0).astype(np.int64)
        backward = [np.zeros(system.n_vertices, dtype=bool)]
        backward[0][end] = True
        for _ in range(n):
            backward.append((A @ backward[-1].astype(np.int64)) > 0)
    firsts = [g.index for g in gens]
    if start is not None:
        firsts = out[system.vertex_index(start)]

    def ok(alpha, remaining):
        return end is None or backward[remaining][gens[alpha].target]

    stack = [(a,) for a in reversed(firsts) if ok(a, n - 1)]
    while stack:
        word = stack.pop()
        if len(word) == n:
            yield word
            continue
        remaining = n - len(word) - 1
        for a in reversed(out[gens[word[-1]].target]):
            if ok(a, remaining):
                stack.append(word + (a,))


def count_words(system: GdmsSystem, n: int) -> int:
    """``#X^n`` via integer matrix powers."""
    A = generator_counts(system).astype(object)
    v = np.ones(system.n_vertices, dtype=object)
    for _ in range(n - 1):
        v = A @ v
    return int(np.ones(system.n_vertices, dtype=object) @ A @ v) if n >= 1 else 0


def partition_deg(system: GdmsSystem, n: int, t: float, budget=WORD_BUDGET) -> float:
    """``Z_n^deg(t)``: sum of ``deg(g_xi)^t`` over all admissible words, by enumeration.

    Words are expanded letter by letter in numpy chunks (depth first once
    the frontier exceeds the chunk size), and chunk sums are combined with
    :func:`math.fsum`.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    total_words = count_words(system, n)
    if total_words > budget:
        raise BudgetExceededError(
            f"#X^{n} = {total_words} exceeds the budget {budget}; use partition_deg_matrix"
        )
    out = _out_generators(system)
    # children[v]: generators leaving v; expansion table per vertex
    child_gen = [np.array(o, dtype=np.int64) for o in out]
    logd = np.log(system.degrees)
    targets = system.targets

    partial = []

    def grow(vert, acc, depth):
        if depth == n:
            partial.append(math.fsum(np.exp(t * acc)))
            return
        counts = np.array([child_gen[v].size for v in range(system.n_vertices)])
        reps = counts[vert]
        parent = np.repeat(np.arange(vert.size), reps)
        offsets = np.arange(parent.size) - np.repeat(np.cumsum(reps) - reps, reps)
        alpha = np.empty(parent.size, dtype=np.int64)
        for v in range(system.n_vertices):
            mask = vert[parent] == v
            if mask.any():
                alpha[mask] = child_gen[v][offsets[mask]]
        new_vert = targets[alpha]
        new_acc = acc[parent] + logd[alpha]
        for lo in range(0, new_vert.size, _CHUNK):
            grow(new_vert[lo : lo + _CHUNK], new_acc[lo : lo + _CHUNK], depth + 1)

    first = np.arange(system.n_generators)
    grow(targets[first], logd[first], 1)
    return math.fsum(partial)


def partition_deg_matrix(system: GdmsSystem, n: int, t: float) -> float:
    """``1^T (M^(t))^n 1`` by repeated matrix-vector products."""
    if n < 1:
        raise ValueError("n must be >= 1")
    M = degree_matrix(system, t).entries
    v = np.ones(system.n_vertices)
    for _ in range(n):
        v = M @ v
    return float(v.sum())


def pressure_deg(system: GdmsSystem, t: float, n_max: int):
    """``((1/n) log Z_n^deg(t) for n = 1..n_max, log rho(M^(t)))``."""
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    M = degree_matrix(system, t).entries
    v = np.ones(system.n_vertices)
    seq = []
    log_scale = 0.0
    for n in range(1, n_max + 1):
        v = M @ v
        s = v.sum()
        log_scale += math.log(s)
        v = v / s
        seq.append(log_scale / n)
    return seq, log_spectral_radius(system, t)


def rate_table(system: GdmsSystem, n_max: int, t: float = 1.0) -> list:
    """Rows ``(n, N_n, (1/n) log N_n)`` for display."""
    seq, _ = pressure_deg(system, t, n_max)
    return [(n, partition_deg_matrix(system, n, t), seq[n - 1]) for n in range(1, n_max + 1)]


import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import helpers
from gdms_thermo import count_words, enumerate_words, partition_deg, partition_deg_matrix, pressure_deg
from gdms_thermo.exceptions import BudgetExceededError
from gdms_thermo.symbolic import rate_table


def brute_words(system, n):
    """Oracle: filter the full product of generator indices by admissibility."""
    gens = system.generators
    out = []
    for w in itertools.product(range(system.n_generators), repeat=n):
        if all(gens[a].target == gens[b].source for a, b in zip(w, w[1:])):
            out.append(w)
    return out


class TestEnumerate:
    def test_examples(self, deg23, two_vertex):
        assert len(list(enumerate_words(deg23, 2))) == 4
        assert len(list(enumerate_words(two_vertex, 2))) == 2
        assert list(enumerate_words(two_vertex, 2, start="1", end="2")) == []
        assert list(enumerate_words(two_vertex, 2, start="1", end="1")) == [(0, 1)]

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 5))
    def test_matches_brute_force(self, seed, n):
        s = helpers.random_system(np.random.default_rng(seed))
        words = list(enumerate_words(s, n))
        assert words == brute_words(s, n)  # same set, lexicographic order
        assert len(words) == count_words(s, n)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 4))
    def test_endpoint_filters(self, seed, n):
        s = helpers.random_system(np.random.default_rng(seed))
        gens = s.generators
        for i in range(s.n_vertices):
            for j in range(s.n_vertices):
                got = list(enumerate_words(s, n, start=i, end=j))
                want = [w for w in brute_words(s, n) if gens[w[0]].source == i and gens[w[-1]].target == j]
                assert got == want

    def test_bad_length(self, z2):
        with pytest.raises(ValueError):
            list(enumerate_words(z2, 0))


class TestPartition:
    def test_examples(self, z2, deg23, two_vertex):
        assert partition_deg(deg23, 3, 1) == 125
        assert partition_deg(z2, 5, 2) == 1024
        assert partition_deg(two_vertex, 2, 1) == 12
        assert partition_deg_matrix(deg23, 3, 1) == 125
        assert partition_deg_matrix(two_vertex, 2, 1) == 12

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_n1_t0_counts_generators(self, seed):
        s = helpers.random_system(np.random.default_rng(seed))
        assert partition_deg_matrix(s, 1, 0) == s.n_generators

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.sampled_from([0, 0.5, 1, 2]))
    def test_enumeration_matches_word_oracle(self, seed, n, t):
        s = helpers.random_system(np.random.default_rng(seed))
        want = math.fsum(
            math.prod(float(s.generators[a].degree) for a in w) ** t for w in enumerate_words(s, n)
        )
        assert partition_deg(s, n, t) == pytest.approx(want, rel=1e-12)
        assert partition_deg_matrix(s, n, t) == pytest.approx(helpers.power_sum(s, n, t), rel=1e-12)

    def test_budget(self, deg23):
        with pytest.raises(BudgetExceededError, match="partition_deg_matrix"):
            partition_deg(deg23, 10, 1, budget=1000)

    def test_count_words_exact(self, deg23):
        assert count_words(deg23, 70) == 2**70


class TestPressureDeg:
    def test_z2(self, z2):
        seq, limit = pressure_deg(z2, 1, 8)
        assert np.allclose(seq, math.log(2), atol=1e-15)
        assert limit == pytest.approx(math.log(2))

    def test_deg23(self, deg23):
        seq, _ = pressure_deg(deg23, 1, 10)
        assert np.allclose(seq, math.log(5), atol=1e-14)

    def test_two_vertex_parity(self, two_vertex):
        seq, limit = pressure_deg(two_vertex, 1, 9)
        # 1^T M^n 1 is 2 * 6^(n/2) for even n and 5 * 6^((n-1)/2) for odd n
        for n, r in enumerate(seq, start=1):
            want = math.log(2 * 6 ** (n // 2)) / n if n % 2 == 0 else math.log(5 * 6 ** ((n - 1) // 2)) / n
            assert r == pytest.approx(want, abs=1e-14)
        assert limit == pytest.approx(0.5 * math.log(6), abs=1e-13)

    def test_large_n_no_overflow(self, deg23):
        seq, limit = pressure_deg(deg23, 3, 2000)
        assert math.isfinite(seq[-1]) and seq[-1] == pytest.approx(limit, abs=1e-12)

    def test_rate_table(self, two_vertex):
        rows = rate_table(two_vertex, 3)
        assert [r[1] for r in rows] == [5, 12, 30]

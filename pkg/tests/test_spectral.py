import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import helpers
from gdms_thermo import (
    NotIrreducibleError,
    RationalMap,
    build_system,
    canonical_weights,
    degree_matrix,
    entropy_identity_residual,
    perron,
    topological_entropy,
    vertex_stationary,
)
from gdms_thermo.spectral import entropy_identity_terms, log_spectral_radius, weight_sums


def eig_perron(M):
    """Oracle: dominant eigenpairs from a dense eigensolver."""
    w, V = np.linalg.eig(M)
    k = int(np.argmax(w.real))
    wl, U = np.linalg.eig(M.T)
    kl = int(np.argmax(wl.real))
    right = np.abs(V[:, k].real)
    left = np.abs(U[:, kl].real)
    return float(w[k].real), left / left.sum(), right / right.sum()


class TestDegreeMatrix:
    def test_examples(self, deg23, two_vertex):
        assert degree_matrix(deg23, 1).entries.tolist() == [[5]]
        assert degree_matrix(two_vertex, 1).entries.tolist() == [[0, 2], [3, 0]]
        assert degree_matrix(two_vertex, 0).entries.tolist() == [[0, 1], [1, 0]]


class TestPerron:
    def test_scalar(self):
        p = perron(np.array([[5.0]]))
        assert p.rho == 5 and p.left.tolist() == [1] and p.right.tolist() == [1]

    def test_periodic(self):
        p = perron(np.array([[0.0, 2.0], [3.0, 0.0]]))
        assert p.rho == pytest.approx(math.sqrt(6), abs=1e-12)

    def test_rank_one(self):
        p = perron(np.array([[1.0, 1.0], [1.0, 1.0]]))
        assert p.rho == pytest.approx(2, abs=1e-13)
        assert np.allclose(p.left, [0.5, 0.5]) and np.allclose(p.right, [0.5, 0.5])

    def test_period_three(self):
        M = np.array([[0, 2.0, 0], [0, 0, 3.0], [4.0, 0, 0]])
        assert perron(M).rho == pytest.approx(24 ** (1 / 3), rel=1e-12)

    def test_reducible_rejected(self):
        with pytest.raises(NotIrreducibleError):
            perron(np.array([[1.0, 1.0], [0.0, 1.0]]))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0, 3))
    def test_matches_dense_eigensolver(self, seed, t):
        s = helpers.random_system(np.random.default_rng(seed))
        M = degree_matrix(s, t).entries
        p = perron(M)
        rho, left, right = eig_perron(M)
        assert p.rho == pytest.approx(rho, rel=1e-10)
        assert np.allclose(p.left, left, atol=1e-8)
        assert np.allclose(p.right, right, atol=1e-8)
        assert np.allclose(p.left @ M, p.rho * p.left, atol=1e-9 * p.rho)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_growth_rate_oracle(self, seed):
        s = helpers.random_system(np.random.default_rng(seed))
        n = 40
        rate = math.log(helpers.power_sum(s, n, 1.0)) / n
        assert abs(rate - topological_entropy(s)) <= 1e-3 + math.log(s.n_vertices**2) / n


class TestEntropy:
    def test_examples(self, z2, deg23, two_vertex):
        assert topological_entropy(z2) == pytest.approx(math.log(2), abs=1e-12)
        assert topological_entropy(deg23) == pytest.approx(math.log(5), abs=1e-12)
        assert topological_entropy(two_vertex) == pytest.approx(0.5 * math.log(6), abs=1e-12)
        assert round(topological_entropy(two_vertex), 7) == 0.8958797

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_log_rho_convex_nonincreasing_shape(self, seed):
        # t -> log rho(M^(t)) is convex; with every degree >= 1 it is nondecreasing in t
        s = helpers.random_system(np.random.default_rng(seed))
        ts = np.linspace(0, 3, 13)
        vals = np.array([log_spectral_radius(s, t) for t in ts])
        assert np.all(np.diff(vals) >= -1e-10)
        assert np.all(vals[:-2] + vals[2:] - 2 * vals[1:-1] >= -1e-9)


class TestWeights:
    def test_examples(self, deg23, two_vertex):
        assert canonical_weights(deg23, 1).a == pytest.approx([0.4, 0.6], abs=1e-12)
        assert canonical_weights(deg23, 0).a == pytest.approx([0.5, 0.5], abs=1e-12)
        w = canonical_weights(two_vertex, 1)
        assert w.a == pytest.approx([1, 1], abs=1e-12)
        u = np.array([math.sqrt(3), math.sqrt(2)])
        assert w.left == pytest.approx(u / u.sum(), abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.1, 3))
    def test_normalised_per_target(self, seed, t):
        s = helpers.random_system(np.random.default_rng(seed))
        w = canonical_weights(s, t)
        assert np.all((w.a > 0) & (w.a <= 1 + 1e-12))
        assert np.allclose(weight_sums(s, w), 1.0, atol=1e-10)

    def test_not_irreducible(self):
        s = build_system(["1", "2"], [("1", "2", [RationalMap.monomial(2)])])
        with pytest.raises(NotIrreducibleError):
            canonical_weights(s, 1)


class TestStationary:
    def test_examples(self, z2, two_vertex):
        assert vertex_stationary(z2, canonical_weights(z2, 1)).c.tolist() == [1]
        c = vertex_stationary(two_vertex, canonical_weights(two_vertex, 1)).c
        assert c == pytest.approx([0.5, 0.5], abs=1e-12)
        tri = helpers.three_cycle()
        assert vertex_stationary(tri, canonical_weights(tri, 1)).c == pytest.approx([1 / 3] * 3, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_fixed_point(self, seed):
        s = helpers.random_system(np.random.default_rng(seed))
        w = canonical_weights(s, 1.3)
        c = vertex_stationary(s, w).c
        B = np.zeros((s.n_vertices, s.n_vertices))
        for g, a in zip(s.generators, w.a):
            B[g.source, g.target] += a
        assert c.sum() == pytest.approx(1)
        assert np.all(c >= 0)
        assert np.allclose(B @ c, c, atol=1e-10)


class TestIdentity:
    def test_deg23(self, deg23):
        terms = entropy_identity_terms(deg23, 1)
        h = -0.4 * math.log(0.4) - 0.6 * math.log(0.6) + 0.4 * math.log(2) + 0.6 * math.log(3)
        assert terms["h"] == pytest.approx(h, abs=1e-12)
        assert round(terms["h"], 7) == 1.6094379
        assert terms["residual"] <= 1e-10

    @pytest.mark.parametrize("t", [0.0, 0.5, 1.0, 2.7])
    def test_z2_any_t(self, z2, t):
        terms = entropy_identity_terms(z2, t)
        assert terms["h"] == pytest.approx(math.log(2), abs=1e-14)
        assert terms["E"] == pytest.approx(math.log(2), abs=1e-14)
        assert terms["residual"] <= 1e-14

    def test_two_vertex(self, two_vertex):
        terms = entropy_identity_terms(two_vertex, 1)
        assert terms["h"] == pytest.approx(0.5 * math.log(6), abs=1e-12)
        assert terms["residual"] <= 1e-10

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.25, 2.5))
    def test_random(self, seed, t):
        s = helpers.random_system(np.random.default_rng(seed))
        assert entropy_identity_residual(s, t) <= 1e-9

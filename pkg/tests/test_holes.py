import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import helpers
from gdms_thermo import (
    KOEBE_K,
    HoleValidationError,
    RationalMap,
    build_hole_family,
    build_system,
    hole_preimages,
    measure_bracket_report,
    postcritical_approx,
)
from gdms_thermo.backward import forward_word
from gdms_thermo.exceptions import BudgetExceededError
from gdms_thermo.holes import atoms_to_csv, koebe_k


def as_set(points, tol=1e-9):
    out = []
    for p in points:
        if all(abs(p - q) > tol for q in out):
            out.append(complex(p))
    return out


def test_koebe_constant():
    assert KOEBE_K == 81.0
    assert koebe_k(0.5) == ((1 + 0.5) / (1 - 0.5)) ** 4


class TestPostcritical:
    def test_z2(self, z2):
        assert as_set(postcritical_approx(z2, 0, 3).points) == [0]

    def test_chebyshev(self):
        s = build_system(["v"], [("v", "v", [RationalMap([-2, 0, 1])])])
        pts = as_set(postcritical_approx(s, 0, 3).points)
        assert sorted(p.real for p in pts) == pytest.approx([-2, 2])

    def test_two_vertex(self, two_vertex):
        assert as_set(postcritical_approx(two_vertex, "1", 2).points) == [0]

    def test_forward_invariance(self):
        # z^2 - 1 (critical orbit 0 -> -1 -> 0) and z^2 + 0.3i on a two-cycle
        s = build_system(
            ["a", "b"],
            [("a", "b", [RationalMap([-1, 0, 1])]), ("b", "a", [RationalMap([0.3j, 0, 1])])],
        )
        depth = 5
        for g in s.generators:
            src = postcritical_approx(s, g.source, depth).points
            dst = postcritical_approx(s, g.target, depth + 1).points
            img = g.map(src)
            d = np.abs(img[:, None] - dst[None, :]).min(axis=1)
            assert d.max() <= 1e-3  # grid pitch 1e-4 times scale, with slack

    def test_budget_truncates(self):
        s = build_system(["v"], [("v", "v", [RationalMap([0.3 + 0.5j, 0, 1]), RationalMap([-0.7, 0, 0, 1])])])
        with pytest.warns(UserWarning):
            pc = postcritical_approx(s, 0, 30, budget=50)
        assert pc.truncated


class TestHoleFamily:
    def test_z2_valid(self, z2):
        hf = build_hole_family(z2, 0.1, centers=[1.0])
        assert hf.centers == (1.0,)
        assert hf.postcritical_clearance[0] == pytest.approx(1.0)
        assert hf.dist_to_cloud[0] <= 1e-12
        assert all(n.startswith("HEURISTIC") for n in hf.notes)

    def test_z2_rejected(self, z2):
        with pytest.raises(HoleValidationError) as info:
            build_hole_family(z2, 0.6, centers=[1.0])
        assert info.value.best_clearance == pytest.approx(1.0)

    def test_two_vertex(self, two_vertex):
        hf = build_hole_family(two_vertex, 0.1, centers={"1": 1, "2": 1})
        assert hf.postcritical_clearance == pytest.approx((1.0, 1.0))

    def test_center_off_julia_set(self, z2):
        with pytest.raises(HoleValidationError, match="away from the sampled Julia set"):
            build_hole_family(z2, 0.1, centers=[0.5])

    def test_auto_centers(self, z2, two_vertex):
        assert build_hole_family(z2, 0.1).centers[0] == pytest.approx(1.0)
        hf = build_hole_family(two_vertex, 0.1)
        assert np.allclose(np.abs(hf.centers), 1.0)

    def test_bad_radius(self, z2):
        with pytest.raises(ValueError):
            build_hole_family(z2, 0.0)


class TestAtoms:
    def test_z2_n1(self, z2):
        hf = build_hole_family(z2, 0.1, centers=[1])
        atoms = hole_preimages(z2, hf, 1.0, 1)
        assert sorted(a.center.real for a in atoms) == pytest.approx([-1, 1])
        for a in atoms:
            assert a.r_inner == pytest.approx(0.1 / (81 * 2))
            assert a.r_outer == pytest.approx(0.1 * 81 / 2)
            assert a.weight == pytest.approx(0.5)

    def test_z2_n3(self, z2):
        hf = build_hole_family(z2, 0.1, centers=[1])
        atoms = hole_preimages(z2, hf, 1.0, 3)
        assert len(atoms) == 8
        assert np.allclose([a.weight for a in atoms], 1 / 8)
        rep = measure_bracket_report(atoms)
        assert rep.total_weight == pytest.approx(1.0, abs=1e-12)
        assert "C1" in rep.statement and "C2" in rep.statement

    def test_z2_delta0(self, z2):
        hf = build_hole_family(z2, 0.1, centers=[1])
        assert measure_bracket_report(hole_preimages(z2, hf, 0.0, 2)).total_weight == 4

    def test_two_vertex(self, two_vertex):
        hf = build_hole_family(two_vertex, 0.1, centers=[1, 1])
        atoms = hole_preimages(two_vertex, hf, 1.0, 2)
        assert len(atoms) == 12
        assert math.fsum(a.weight for a in atoms) == pytest.approx(2.0, abs=1e-12)

    def test_empty_and_budget(self, z2):
        with pytest.raises(ValueError):
            measure_bracket_report([])
        hf = build_hole_family(z2, 0.1, centers=[1])
        with pytest.raises(BudgetExceededError):
            hole_preimages(z2, hf, 1.0, 12, budget=1000)

    @settings(max_examples=10, deadline=None)
    @given(st.integers(1, 5), st.floats(0, 2.5))
    def test_weights_sum_to_partition(self, n, delta):
        s = helpers.two_vertex()
        hf = build_hole_family(s, 0.1, centers=[1, 1])
        atoms = hole_preimages(s, hf, delta, n)
        want = sum(math.exp(-delta * a.log_deriv) for a in atoms)
        assert math.fsum(a.weight for a in atoms) == pytest.approx(want, rel=1e-12)

    @pytest.mark.parametrize("name", ["z2", "two_vertex"])
    def test_inner_disks_disjoint(self, name):
        s = helpers.NAMED[name]()
        hf = build_hole_family(s, 0.1, centers=[1] * s.n_vertices)
        for j in range(s.n_vertices):
            atoms = [a for a in hole_preimages(s, hf, 1.0, 4) if a.target_vertex == j]
            c = np.array([a.center for a in atoms])
            r = np.array([a.r_inner for a in atoms])
            gap = np.abs(c[:, None] - c[None, :]) - (r[:, None] + r[None, :])
            np.fill_diagonal(gap, np.inf)
            assert gap.min() > 0

    def test_inner_disk_maps_into_hole(self, two_vertex):
        hf = build_hole_family(two_vertex, 0.1, centers=[1, 1])
        rng = np.random.default_rng(0)
        for a in hole_preimages(two_vertex, hf, 1.0, 3):
            w = a.center + a.r_inner * np.sqrt(rng.random(10)) * np.exp(2j * np.pi * rng.random(10))
            img = forward_word(two_vertex, a.word, w)
            assert np.all(np.abs(img - hf.centers[a.target_vertex]) < hf.radius)

    def test_csv(self, z2):
        hf = build_hole_family(z2, 0.1, centers=[1])
        text = atoms_to_csv(z2, hole_preimages(z2, hf, 1.0, 2))
        lines = text.strip().split("\n")
        assert lines[0] == "word,center_re,center_im,r_inner,r_outer,weight"
        assert len(lines) == 5 and lines[1].startswith("e1:0-e1:0,")

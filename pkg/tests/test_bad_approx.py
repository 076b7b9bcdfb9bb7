import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from badflow.bad_approx import (
    ball_class,
    bad_constant_report,
    bad_constant_up_to_height,
    best_p,
    cross_ratio_defect,
    delta_box,
    diagonal,
    height_band,
    in_bad_eps,
    lattice_pairs,
    partition_index,
    pick_constants,
    quality,
    resonant_bands,
    resonant_pairs,
    witness_report,
)
from badflow.errors import NoClass, NotAdmissible, ZeroElement
from badflow.game_engine import Ball
from badflow.number_field import WeightVector, embed, enumerate_bounded, height, quadratic_field

from conftest import WITNESS, WITNESS_BAD_CONSTANT, diag, witness_vector

CONSTS = pick_constants(0.3, 1.0, 0.9, 2)


class TestQuality:
    def test_exact_ratio_point(self, gauss, balanced):
        z = diag((1 + 1j) / 2)
        assert quality(gauss, balanced, z, gauss.element((-1, -1)), gauss.integer(2)) == pytest.approx(0, abs=1e-15)

    def test_direct_value(self, gauss, balanced):
        z = diag((1 + 1j) / 2)
        assert quality(gauss, balanced, z, gauss.zero, gauss.one) == pytest.approx(math.sqrt(0.5), rel=1e-12)

    def test_zero_weight_term_dominates(self, gauss):
        e1 = WeightVector.unit(2)
        z = diag(0.37 - 0.2j)
        q = gauss.element((1, 1))
        for p in enumerate_bounded(gauss, 3):
            assert quality(gauss, e1, z, p, q) >= math.sqrt(2) - 1e-12

    def test_zero_q_rejected(self, gauss, balanced):
        with pytest.raises(ZeroElement):
            quality(gauss, balanced, diag(0.1), gauss.one, gauss.zero)

    def test_wrong_length_rejected(self, gauss, balanced):
        with pytest.raises(ValueError):
            quality(gauss, balanced, [0.1, 0.2, 0.3], gauss.one, gauss.one)


class TestBestP:
    def test_examples(self, gauss):
        assert best_p(gauss, diag(0.5 + 0.5j), gauss.integer(2)).coords == (-1, -1)
        assert best_p(gauss, diag(0), gauss.element((3, 2))).coords == (0, 0)

    def test_matches_exhaustive_search(self, gauss, balanced):
        z = diag(0.49)
        p = best_p(gauss, z, gauss.one, balanced, search=1)
        got = quality(gauss, balanced, z, p, gauss.one)
        for a in range(-3, 4):
            for b in range(-3, 4):
                assert got <= quality(gauss, balanced, z, gauss.element((a, b)), gauss.one) + 1e-15


class TestBadConstant:
    def test_ratio_point_gives_zero(self, gauss, balanced):
        z = diag((2 + 1j) / (1 + 1j))
        assert bad_constant_up_to_height(gauss, balanced, z, 2) == pytest.approx(0, abs=1e-12)

    def test_origin(self, gauss, balanced):
        assert bad_constant_up_to_height(gauss, balanced, diag(0), 1) == 0

    def test_witness_stabilises(self, gauss, balanced):
        vals = [bad_constant_up_to_height(gauss, balanced, witness_vector(), Q) for Q in (10, 20, 50)]
        assert vals == pytest.approx([WITNESS_BAD_CONSTANT] * 3, rel=1e-12)

    def test_monotone_in_height(self, gauss, balanced):
        z = diag(0.3141 + 0.2718j)
        vals = [bad_constant_up_to_height(gauss, balanced, z, Q) for Q in (2, 4, 8, 16, 32)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_lattice_search_agrees_with_enumeration(self, gauss, balanced):
        rng = np.random.default_rng(7)
        for _ in range(10):
            z = diag(complex(rng.random(), rng.random()))
            brute = bad_constant_report(gauss, balanced, z, 20)
            rep = witness_report(gauss, balanced, 1e-3, z, 400)
            assert rep.worst_pair["quality"] == pytest.approx(brute.value, rel=1e-9)

    def test_unit_invariance(self, gauss, balanced):
        z = diag(0.2 + 0.7j)
        p, q = gauss.element((1, -2)), gauss.element((3, 1))
        base = quality(gauss, balanced, z, p, q)
        for u in gauss.roots_of_unity():
            assert quality(gauss, balanced, z, u * p, u * q) == pytest.approx(base, rel=1e-12)


class TestDeltaBox:
    def test_example(self, gauss, balanced):
        box = delta_box(gauss, balanced, 0.1, gauss.one, gauss.element((1, 1)))
        assert np.allclose(box.center, [0.5 - 0.5j, 0.5 + 0.5j])
        assert np.allclose(box.radii, [0.05, 0.05])
        assert box.contains(box.center)

    def test_unit_denominator(self, gauss, balanced):
        box = delta_box(gauss, balanced, 0.1, gauss.zero, gauss.one)
        assert np.allclose(box.center, 0) and np.allclose(box.radii, 0.1)

    def test_inadmissible_q(self, gauss):
        with pytest.raises(NotAdmissible):
            delta_box(gauss, WeightVector.unit(2), 0.5, gauss.one, gauss.element((1, 1)))

    def test_distance_and_ball(self, gauss, balanced):
        box = delta_box(gauss, balanced, 0.1, gauss.zero, gauss.one)
        assert box.distance_to([0.3, 0]) == pytest.approx(0.2)
        assert box.meets_ball([0.3, 0], 0.2) and not box.meets_ball([0.3, 0], 0.19)


class TestMembership:
    def test_box_centre_is_not_bad(self, gauss, balanced):
        assert not in_bad_eps(gauss, balanced, 0.05, diag(1 / (1 + 1j)), 4)

    def test_witness_is_bad_below_its_constant(self, gauss, balanced):
        assert in_bad_eps(gauss, balanced, 0.45, witness_vector(), 2500)
        assert not in_bad_eps(gauss, balanced, 2 * WITNESS_BAD_CONSTANT, witness_vector(), 2500)

    def test_agrees_with_bad_constant(self, gauss, balanced):
        # H(q) = |q|^2 for balanced quadratic weights, so Qmax = 12 matches Hmax = 144
        rng = np.random.default_rng(2)
        for _ in range(15):
            z = diag(complex(rng.random(), rng.random()))
            c = bad_constant_up_to_height(gauss, balanced, z, 12)
            for eps in (0.5 * c, 2 * c):
                assert in_bad_eps(gauss, balanced, eps, z, 144) == (c > eps)

    def test_nonpositive_eps(self, gauss, balanced):
        with pytest.raises(ValueError):
            in_bad_eps(gauss, balanced, 0, diag(0.1), 4)

    def test_witness_report_pins_best_pair(self, gauss, balanced):
        rep = witness_report(gauss, balanced, 0.1, witness_vector(), 1e6)
        assert rep.verdict
        assert rep.worst_pair["quality"] == pytest.approx(WITNESS_BAD_CONSTANT, rel=1e-12)
        assert rep.worst_pair["q"] in ([-1, -1], [1, 1], [-1, 1], [1, -1])

    def test_lattice_pairs_finds_exact_cancellation(self, gauss):
        z = diag((1 - 2j) / (2 + 1j))
        cands = lattice_pairs(gauss, z, [1e-9, 1e-9], [3, 3], sign=-1)
        assert any(c.q.coords == (2, 1) and c.p.coords == (1, -2) for c in cands)


class TestConstants:
    def test_reference_constants(self):
        assert CONSTS.R == 46
        assert CONSTS.check()
        assert 2 / (CONSTS.R - 1) <= 0.3**2 / 2
        assert CONSTS.eps == pytest.approx(0.9 / (4 * 46**8))

    def test_R_is_minimal(self):
        smaller = type(CONSTS)(0.3, 1.0, 0.9, 2, CONSTS.R - 1)
        assert not smaller.check()

    def test_R_nonincreasing_in_beta(self):
        Rs = [pick_constants(b, 1.0, 0.9, 2).R for b in np.linspace(0.05, 0.33, 15)]
        assert all(a >= b for a, b in zip(Rs, Rs[1:]))

    @pytest.mark.parametrize("args", [(0.4, 1, 0.9, 2), (0.3, 0, 0.9, 2), (0.3, 1, 1.2, 2)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            pick_constants(*args)

    def test_height_sequence(self):
        assert float(CONSTS.H(3) / CONSTS.H(2)) == pytest.approx(46)
        assert float(CONSTS.H(0)) == pytest.approx(CONSTS.eps / 0.9)


class TestBallClass:
    def test_examples(self):
        assert ball_class(CONSTS, 0.9) == 0
        assert ball_class(CONSTS, mpmath.mpf(0.9) / 46) == 1

    def test_gap_consistent_with_band_test(self):
        rho = mpmath.mpf(0.9) * 0.3 / 2 / 46**3
        inside = [l for l in range(8) if CONSTS.band(l)[0] < rho <= CONSTS.band(l)[1]]
        if inside:
            assert ball_class(CONSTS, rho) == max(inside)
        else:
            with pytest.raises(NoClass):
                ball_class(CONSTS, rho)

    def test_outside_range(self):
        with pytest.raises(NoClass):
            ball_class(CONSTS, 1.5)

    @settings(max_examples=200, deadline=None)
    @given(l=st.integers(0, 30), frac=st.floats(0.301, 1.0))
    def test_band_membership(self, l, frac):
        rho = mpmath.mpf(0.9) / mpmath.mpf(46) ** l * mpmath.mpf(frac)
        assert ball_class(CONSTS, rho) == l


class TestPartitions:
    def test_left_closed_height_bands(self):
        assert height_band(CONSTS, CONSTS.H(2)) == 2
        assert height_band(CONSTS, CONSTS.H(2) * (1 - mpmath.mpf(10) ** -9)) == 1

    def test_balanced_quadratic_uses_first_norm_band(self, gauss, balanced):
        for q in enumerate_bounded(gauss, 6):
            idx = partition_index(CONSTS, gauss, balanced, q)
            H = height(gauss, balanced, q)
            assert idx.l == 1
            assert float(CONSTS.H(idx.m)) <= H * (1 + 1e-12) < float(CONSTS.H(idx.m + 1))

    def test_inadmissible(self, gauss):
        with pytest.raises(NotAdmissible):
            partition_index(CONSTS, gauss, WeightVector.unit(2), gauss.one)


class TestResonance:
    def test_far_from_ratio_points(self, gauss, balanced):
        B = Ball.make(witness_vector(), mpmath.mpf(0.9) / 46**6)
        assert resonant_pairs(CONSTS, gauss, balanced, B, 1) == []

    def test_ratio_point_band(self, gauss, balanced):
        z = 1 / (1 + 1j)
        B = Ball.make(diag(z), mpmath.mpf(0.9) / 46**7)
        bands = resonant_bands(CONSTS, gauss, balanced, B, 7, 3)
        assert list(bands) == [1]
        pairs = bands[1]
        assert any(q.coords == (1, 1) and p.coords == (1, 0) for p, q in pairs)
        p0, q0 = pairs[0]
        assert all(not cross_ratio_defect(p0, q0, p, q) for p, q in pairs)


def test_diagonal_helper():
    assert np.allclose(diagonal(1 + 2j), [1 + 2j, 1 - 2j])

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qbitgen.optics import (
    ChannelModel,
    CoherentState,
    FockExpansion,
    GaussianState,
    attenuate_gaussian,
    db_to_linear,
    fidelity_floor_from_clicks,
    helstrom_success,
    honest_click_prob,
    no_click_prob_fock,
    overlap_angle,
    p_function_positive,
)

from oracles import helstrom_brute_force, no_click_brute_force

NOMINAL = ChannelModel()
# frozen from a 30-digit mpmath evaluation of the closed forms
P_HONEST = 9.20462237169406e-4
COS_THETA_003 = 0.9417645335842487
HELSTROM_003 = 0.6681365243506319


def random_gaussian(rng, r_max=2.0):
    r = rng.uniform(0, r_max)
    angle = rng.uniform(0, math.pi)
    disp = complex(*rng.normal(size=2))
    return GaussianState.squeezed(r, angle, disp)


class TestCoherentState:
    def test_self_overlap_is_one(self):
        s = CoherentState(0.3 - 0.2j)
        assert abs(s.overlap(s)) == pytest.approx(1.0, abs=1e-15)

    @given(st.complex_numbers(max_magnitude=3), st.complex_numbers(max_magnitude=3))
    def test_overlap_modulus(self, a, b):
        got = abs(CoherentState(a).overlap(CoherentState(b)))
        assert got == pytest.approx(math.exp(-abs(a - b) ** 2 / 2), rel=1e-9, abs=1e-300)

    def test_mean_photons(self):
        assert CoherentState(math.sqrt(0.03)).mean_photons == pytest.approx(0.03)

    def test_antipodal_overlap_matches_angle(self):
        a = math.sqrt(0.03)
        ov = abs(CoherentState(a).overlap(CoherentState(-a)))
        assert ov == pytest.approx(math.cos(overlap_angle(0.03)), rel=1e-12)


class TestChannel:
    def test_nominal_defaults(self):
        assert NOMINAL.a0t == pytest.approx(10 ** -0.43)
        assert NOMINAL.eta_tot == pytest.approx(0.0390111990552031, rel=1e-12)
        assert NOMINAL.visibility_residual == pytest.approx(5.25e-4)

    def test_db(self):
        assert db_to_linear(10) == pytest.approx(0.1)
        assert db_to_linear(0) == 1.0

    @pytest.mark.parametrize(
        "kw", [{"eta": 1.5}, {"dark": -0.1}, {"alpha2": -1}, {"n0": 0}, {"a0t": 0.0}]
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ChannelModel(**kw)

    def test_matched_n0(self):
        ch = ChannelModel.matched(0.03)
        assert ch.att_bob_to_alice * ch.att_alice * ch.n0 == pytest.approx(0.03)


class TestOverlapAngle:
    def test_zero(self):
        assert overlap_angle(0.0) == 0.0

    def test_nominal_point(self):
        assert math.cos(overlap_angle(0.03)) == pytest.approx(COS_THETA_003, rel=1e-13)

    def test_orthogonal_limit(self):
        assert overlap_angle(10.0) == pytest.approx(math.pi / 2, abs=1e-8)

    def test_negative(self):
        with pytest.raises(ValueError):
            overlap_angle(-1e-3)

    @given(st.floats(0, 5), st.floats(1e-6, 1))
    def test_strictly_increasing(self, x, dx):
        assert overlap_angle(x + dx) > overlap_angle(x) or overlap_angle(x) == pytest.approx(math.pi / 2)


class TestHelstrom:
    def test_limits(self):
        assert helstrom_success(0.0) == 0.5
        assert helstrom_success(math.pi / 2) == 1.0

    def test_nominal_point(self):
        assert helstrom_success(overlap_angle(0.03)) == pytest.approx(HELSTROM_003, rel=1e-13)

    @pytest.mark.parametrize("alpha2", [0.01, 0.03, 0.1, 0.5])
    def test_against_trace_distance(self, alpha2):
        expected = helstrom_brute_force(math.sqrt(alpha2))
        assert helstrom_success(overlap_angle(alpha2)) == pytest.approx(expected, abs=1e-10)

    def test_domain(self):
        with pytest.raises(ValueError):
            helstrom_success(2.0)


class TestClicks:
    def test_perfect_apparatus(self):
        assert honest_click_prob(ChannelModel(visibility=1.0, dark=0.0)) == 0.0

    def test_nominal_point(self):
        assert honest_click_prob(NOMINAL) == pytest.approx(P_HONEST, rel=1e-12)

    def test_dark_only(self):
        assert honest_click_prob(ChannelModel(alpha2=0.0)) == pytest.approx(9e-4, rel=1e-12)

    def test_small_argument_form(self):
        approx = NOMINAL.dark + NOMINAL.eta_tot * NOMINAL.visibility_residual
        assert honest_click_prob(NOMINAL) == pytest.approx(approx, rel=1e-4)

    @given(st.floats(0, 1), st.floats(1e-4, 1))
    def test_monotone_alpha2(self, a2, d):
        lo = honest_click_prob(ChannelModel(alpha2=a2))
        hi = honest_click_prob(ChannelModel(alpha2=a2 + d))
        assert hi >= lo

    @given(st.floats(0, 0.99), st.floats(1e-3, 0.01))
    def test_monotone_visibility(self, v, d):
        worse = honest_click_prob(ChannelModel(visibility=v))
        better = honest_click_prob(ChannelModel(visibility=v + d))
        assert better <= worse


class TestFock:
    def test_vacuum(self):
        assert no_click_prob_fock(FockExpansion((1.0,)), NOMINAL) == 1.0

    def test_one_photon(self):
        ch = ChannelModel(a0t=0.39, eta=0.1)
        assert no_click_prob_fock(FockExpansion((0, 1, 0)), ch) == pytest.approx(0.961)

    def test_unnormalized(self):
        with pytest.raises(ValueError):
            FockExpansion((1.0, 1.0))

    def test_too_long(self):
        with pytest.raises(ValueError):
            FockExpansion.from_unnormalized(np.ones(40))

    def test_fidelity(self):
        e = FockExpansion.from_unnormalized([1, 1])
        assert e.fidelity == pytest.approx(0.5)

    @pytest.mark.parametrize("seed", range(5))
    def test_against_beam_splitter_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 6))
        c = rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1)
        e = FockExpansion.from_unnormalized(c)
        expected = no_click_brute_force(e.coeffs, NOMINAL.alpha, NOMINAL.eta_tot)
        assert no_click_prob_fock(e, NOMINAL) == pytest.approx(expected, abs=1e-6)

    @given(st.lists(st.complex_numbers(max_magnitude=1), min_size=1, max_size=8))
    def test_click_bound(self, coeffs):
        # P(click) >= (1 - f) * eta_tot
        if np.linalg.norm(coeffs) < 1e-3:
            return
        e = FockExpansion.from_unnormalized(coeffs)
        p_click = 1.0 - no_click_prob_fock(e, NOMINAL)
        assert p_click >= (1.0 - e.fidelity) * NOMINAL.eta_tot - 1e-12


class TestFidelityFloor:
    def test_all_dark(self):
        assert fidelity_floor_from_clicks(NOMINAL.dark, NOMINAL) == 1.0

    def test_boundary(self):
        assert fidelity_floor_from_clicks(NOMINAL.dark + NOMINAL.eta_tot, NOMINAL) == pytest.approx(0.0, abs=1e-12)

    def test_inverse_of_honest(self):
        assert fidelity_floor_from_clicks(9.205e-4, NOMINAL) == pytest.approx(0.9994745098716143, rel=1e-12)

    def test_clamped(self):
        assert fidelity_floor_from_clicks(0.0, NOMINAL) == 1.0
        assert fidelity_floor_from_clicks(1.0, NOMINAL) == 0.0


class TestGaussian:
    def test_identity(self):
        g = random_gaussian(np.random.default_rng(0))
        out = attenuate_gaussian(g, 1.0, 0.0)
        np.testing.assert_allclose(out.cov, g.cov, atol=1e-15)
        np.testing.assert_allclose(out.mean, g.mean, atol=1e-15)

    @pytest.mark.parametrize("a", [1e-3, 0.3, 0.9])
    def test_coherent_stays_coherent(self, a):
        g = GaussianState.coherent(0.4 + 0.1j)
        out = attenuate_gaussian(g, a)
        np.testing.assert_allclose(out.cov, 0.5 * np.eye(2), atol=1e-15)
        np.testing.assert_allclose(out.mean, math.sqrt(a) * g.mean)

    def test_squeezed_then_attenuated(self):
        g = GaussianState.squeezed(0.5)
        assert not p_function_positive(g)
        assert p_function_positive(attenuate_gaussian(g, 1e-3, 1e-3))

    def test_vacuum_positive(self):
        assert p_function_positive(GaussianState.vacuum())

    @pytest.mark.parametrize("a", [0.0, -0.1, 1.1])
    def test_domain(self, a):
        with pytest.raises(ValueError):
            attenuate_gaussian(GaussianState.vacuum(), a)

    def test_uncertainty_enforced(self):
        with pytest.raises(ValueError):
            GaussianState(np.zeros(2), 0.1 * np.eye(2))

    @settings(max_examples=50)
    @given(st.integers(0, 2**32 - 1), st.floats(1e-4, 1.0), st.floats(0, 1))
    def test_chaotic_photons_classicalize(self, seed, a, extra):
        g = random_gaussian(np.random.default_rng(seed))
        assert p_function_positive(attenuate_gaussian(g, a, a + extra))

    @settings(max_examples=50)
    @given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1.0), st.floats(1e-3, 1.0))
    def test_pure_loss_composes(self, seed, a1, a2):
        g = random_gaussian(np.random.default_rng(seed))
        two = attenuate_gaussian(attenuate_gaussian(g, a2), a1)
        one = attenuate_gaussian(g, a1 * a2)
        np.testing.assert_allclose(two.cov, one.cov, atol=1e-12)
        np.testing.assert_allclose(two.mean, one.mean, atol=1e-12)

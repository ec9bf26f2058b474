import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paramskill.dmp import (NUM_BASES, POLICY_DIM, DmpConstants, ParameterDomainError,
                            PolicyVector, basis_layout, canonical_phase, default_theta, forcing,
                            integrate_dmp, validate_theta)

CONSTS = DmpConstants()


def theta_with(goal=0.0, weights=None, lam=0.5):
    th = default_theta(goal, lam)
    if weights is not None:
        th[2:] = weights
    return th


class TestConstants:
    def test_critical_damping_default(self):
        assert CONSTS.damping_q == pytest.approx(2 * math.sqrt(CONSTS.spring_k))
        assert DmpConstants(spring_k=64.0).damping_q == pytest.approx(16.0)

    def test_damping_override(self):
        assert DmpConstants(damping_q=5.0).damping_q == 5.0

    def test_centers_uniform_in_time(self):
        c, h = basis_layout(35, 4.0, 1.0)
        times = -np.log(c) / 4.0
        assert np.allclose(np.diff(times), 1.0 / 34)
        assert c[0] == 1.0 and np.all(c > 0) and np.all(h > 0)

    def test_neighbours_cross_at_half_height(self):
        c, h = CONSTS.centers, CONSTS.widths
        for i in range(NUM_BASES - 1):
            mid = 0.5 * (c[i] + c[i + 1])
            assert math.exp(-h[i] * (mid - c[i]) ** 2) == pytest.approx(0.5, rel=1e-12)

    @pytest.mark.parametrize("kwargs", [
        {"spring_k": -1.0}, {"temporal_scale": 0.0}, {"phase_alpha": -2.0},
        {"num_bases": 3, "centers": np.array([0.5, 0.6, 0.5]), "widths": np.ones(3)},
        {"num_bases": 2, "centers": np.array([0.5, 1.5]), "widths": np.ones(2)},
        {"num_bases": 2, "centers": np.array([0.5, 0.9]), "widths": np.array([1.0, 0.0])},
    ])
    def test_invalid_constants_rejected(self, kwargs):
        with pytest.raises(ValueError):
            DmpConstants(**kwargs)

    def test_round_trip_dict(self):
        assert DmpConstants.from_dict(CONSTS.to_dict()) == CONSTS


class TestPolicyVector:
    def test_flat_order(self):
        pv = PolicyVector(0.3, 1.2, np.arange(35.0))
        arr = pv.to_array()
        assert arr.shape == (POLICY_DIM,)
        assert arr[0] == 0.3 and arr[1] == 1.2 and np.array_equal(arr[2:], np.arange(35.0))
        assert np.array_equal(PolicyVector.from_array(arr).to_array(), arr)

    @pytest.mark.parametrize("bad", [-0.01, 1.01, math.nan])
    def test_lambda_domain(self, bad):
        with pytest.raises(ParameterDomainError):
            validate_theta(theta_with(lam=bad))

    def test_wrong_length(self):
        with pytest.raises(ParameterDomainError):
            validate_theta(np.zeros(36))

    def test_non_finite_weight(self):
        th = theta_with()
        th[10] = math.inf
        with pytest.raises(ParameterDomainError):
            validate_theta(th)


class TestPhase:
    def test_initial_value(self):
        assert canonical_phase(0.0, CONSTS) == 1.0

    def test_half_life(self):
        t = CONSTS.temporal_scale * math.log(2) / CONSTS.phase_alpha
        assert canonical_phase(t, CONSTS) == pytest.approx(0.5, abs=1e-15)

    def test_large_time_positive(self):
        assert 0.0 <= canonical_phase(500.0, CONSTS) < 1e-100

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            canonical_phase(-0.1, CONSTS)


class TestForcing:
    def test_constant_weights(self):
        for s in (1.0, 0.5, 0.02, 1e-3):
            assert forcing(s, np.full(35, 2.5), CONSTS) == pytest.approx(2.5, abs=1e-12)

    def test_zero_weights(self):
        assert forcing(0.3, np.zeros(35), CONSTS) == 0.0

    def test_underflow_returns_zero(self):
        narrow = DmpConstants(num_bases=2, centers=np.array([1.0, 0.9]),
                              widths=np.array([1e6, 1e6]))
        assert forcing(0.01, np.array([3.0, 4.0]), narrow) == 0.0

    def test_narrow_bases_pick_own_weight(self):
        # very large widths isolate basis 7; compare with a 50-digit evaluation
        c = CONSTS.centers
        wide = DmpConstants(centers=c, widths=np.full(35, 1e5))
        rng = np.random.default_rng(3)
        w = rng.normal(size=35)
        s = float(c[6])
        got = forcing(s, w, wide)
        mpmath.mp.dps = 50
        psi = [mpmath.exp(-mpmath.mpf(1e5) * (mpmath.mpf(s) - mpmath.mpf(float(ci))) ** 2) for ci in c]
        oracle = sum(mpmath.mpf(float(wi)) * p for wi, p in zip(w, psi)) / sum(psi)
        assert abs(got - float(oracle)) < 1e-12
        assert abs(got - w[6]) < 1e-6

    @pytest.mark.property
    @settings(max_examples=200)
    @given(st.floats(1e-3, 1.0), st.floats(1e-3, 1e3),
           st.lists(st.floats(-50, 50), min_size=35, max_size=35))
    def test_invariant_to_common_basis_scaling(self, s, factor, weights):
        w = np.array(weights)
        psi = np.exp(-CONSTS.widths * (s - CONSTS.centers) ** 2)
        scaled = psi * factor
        oracle = np.dot(w, scaled) / scaled.sum()
        assert forcing(s, w, CONSTS) == pytest.approx(oracle, rel=1e-9, abs=1e-9)


def critically_damped(t, x0, goal, omega):
    return goal + (x0 - goal) * (1 + omega * t) * np.exp(-omega * t)


class TestIntegration:
    def test_first_sample(self):
        tr = integrate_dmp(theta_with(1.0), 0.2, 1.0, CONSTS, 1e-3)
        assert (tr.time[0], tr.phase[0], tr.angle[0], tr.velocity[0]) == (0.0, 1.0, 0.2, 0.0)
        assert np.all(np.diff(tr.time) > 0)

    def test_reaches_goal_without_forcing(self):
        t_end = 10 * CONSTS.temporal_scale / math.sqrt(CONSTS.spring_k)
        tr = integrate_dmp(theta_with(1.3), -0.4, t_end, CONSTS, 1e-3)
        assert abs(tr.angle[-1] - 1.3) < 1e-3

    def test_equilibrium_when_goal_is_start(self):
        w = np.random.default_rng(0).normal(size=35) * 10
        tr = integrate_dmp(theta_with(0.7, w), 0.7, 2.0, CONSTS, 1e-3)
        assert np.all(tr.angle == 0.7) and np.all(tr.velocity == 0.0)

    def test_matches_closed_form_step_response(self):
        omega = math.sqrt(CONSTS.spring_k) / CONSTS.temporal_scale
        tr = integrate_dmp(theta_with(2.0), 0.5, 2.0, CONSTS, 1e-3)
        exact = critically_damped(tr.time, 0.5, 2.0, omega)
        assert np.max(np.abs(tr.angle - exact)) < 1e-9
        assert np.all(np.sign(2.0 - tr.angle[:-1]) >= 0)

    def test_non_finite_theta_rejected(self):
        th = theta_with()
        th[1] = math.nan
        with pytest.raises(ParameterDomainError):
            integrate_dmp(th, 0.0, 1.0, CONSTS, 1e-3)

    @pytest.mark.parametrize("duration,dt", [(0.0, 1e-3), (1.0, 0.0), (-1.0, 1e-3)])
    def test_bad_grid_rejected(self, duration, dt):
        with pytest.raises(ValueError):
            integrate_dmp(theta_with(1.0), 0.0, duration, CONSTS, dt)

    def test_grid_refinement(self):
        w = np.random.default_rng(1).normal(size=35) * 5
        th = theta_with(1.5, w)
        a = integrate_dmp(th, 0.0, 1.0, CONSTS, 1e-3).angle[-1]
        b = integrate_dmp(th, 0.0, 1.0, CONSTS, 5e-4).angle[-1]
        assert abs(a - b) < 1e-5

    @pytest.mark.property
    @settings(max_examples=200)
    @given(st.floats(-10, 10), st.floats(-10, 10))
    def test_converges_for_any_offset(self, x0, goal):
        tr = integrate_dmp(theta_with(goal), x0, 2.0, CONSTS, 1e-3)
        assert abs(tr.angle[-1] - goal) < 1e-5

    @pytest.mark.property
    @settings(max_examples=200)
    @given(st.floats(-5, 5), st.lists(st.floats(-20, 20), min_size=35, max_size=35),
           st.floats(0.05, 2.0))
    def test_phase_strictly_decreasing(self, goal, weights, duration):
        tr = integrate_dmp(theta_with(goal, np.array(weights)), 0.0, duration, CONSTS, 1e-3)
        assert np.all(np.diff(tr.phase) < 0)
        assert tr.phase[0] == 1.0 and tr.phase[-1] > 0

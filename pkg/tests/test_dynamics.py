import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from banditpref.dynamics import (OdeParams, OdeState, _rk4, discrete_vs_ode, integrate, ode_rhs,
                                 theorem5_check)
from banditpref.errors import ConfigurationError, DomainError
from banditpref.estimators import TrainConfig
from banditpref.preference_model import ComparisonDistribution, PairwiseDataset, sample_pairwise_dataset


def sig(x):
    return 1 / (1 + math.exp(-x))


class TestRhs:
    def test_stationary_point(self):
        for mu in (0.3, 0.5, 0.9):
            d_dot, y_dot = ode_rhs(OdeState(0.0, 0.5), OdeParams(0.1, 0.01, 100, mu))
            assert abs(d_dot) < 1e-15 and abs(y_dot) < 1e-15

    def test_initial_state(self):
        p = OdeParams(0.1, 0.02, 50, 0.8)
        d_dot, y_dot = ode_rhs(OdeState(0.0, 1.0), p)
        assert d_dot == pytest.approx(p.rate * (0.8 - 0.5), rel=1e-14)
        assert y_dot == pytest.approx(-0.01, rel=1e-14)

    def test_symmetric_preference_restores(self):
        p = OdeParams(0.1, 0.01, 100, 0.5)
        for d in np.linspace(-5, 5, 41):
            d_dot, _ = ode_rhs(OdeState(d, 0.5), p)
            assert np.sign(d_dot) == -np.sign(d)

    def test_params_validation(self):
        with pytest.raises(ConfigurationError):
            OdeParams(0.1, 0.0, 10, 1.0)
        with pytest.raises(ConfigurationError):
            OdeParams(0.0, 0.0, 10, 0.5)


class TestIntegrate:
    def test_zero_horizon(self):
        traj = integrate(OdeParams(0.1, 0.1, 10, 0.7), 0.0)
        assert traj.final == OdeState(0.0, 1.0, 0.0)

    def test_bad_step(self):
        with pytest.raises(ConfigurationError):
            integrate(OdeParams(0.1, 0.1, 10, 0.7), 1.0, h=0.0)
        with pytest.raises(ConfigurationError):
            integrate(OdeParams(0.1, 0.1, 10, 0.7), -1.0)

    @given(st.floats(0.01, 1.0), st.floats(0.0, 0.5), st.floats(1, 100), st.floats(0.5, 0.99), st.floats(0.1, 20))
    def test_label_floor_and_lyapunov(self, alpha, beta, n, mu, T):
        p = OdeParams(alpha, beta, n, mu)
        traj = integrate(p, T)
        assert np.all(traj.y >= np.exp(-beta * traj.t) - 1e-9)
        assert np.all(traj.y <= 1 + 1e-12)
        s = traj.sigma_d
        assert np.all(s >= 0.5 - 1e-9) and np.all(s <= mu + 1e-9)

    def test_matches_reference_solver(self):
        p = OdeParams(0.5, 0.3, 4, 0.8)
        traj = integrate(p, 5.0)

        def f(t, s):
            return ode_rhs(OdeState(s[0], s[1]), p)

        ref = solve_ivp(f, (0, 5.0), [0.0, 1.0], t_eval=traj.t, rtol=1e-12, atol=1e-14, method="DOP853")
        np.testing.assert_allclose(traj.d, ref.y[0], atol=1e-7)
        np.testing.assert_allclose(traj.y, ref.y[1], atol=1e-7)

    def test_fourth_order(self):
        p = OdeParams(0.5, 0.3, 4, 0.8)

        def f(t, s):
            return ode_rhs(OdeState(s[0], s[1]), p)

        ref = solve_ivp(f, (0, 2.0), [0.0, 1.0], rtol=1e-13, atol=1e-15, method="DOP853").y[:, -1]
        errs = []
        for h in (0.2, 0.1):
            _, d, y = _rk4(p, 2.0, h, OdeState())
            errs.append(max(abs(d[-1] - ref[0]), abs(y[-1] - ref[1])))
        assert 12 < errs[0] / errs[1] < 20


class TestBound:
    @pytest.mark.parametrize("mu", [0.6, 0.75, 0.9])
    def test_large_sample_regime(self, mu):
        p = OdeParams(alpha=1e4 ** -0.5, beta=1e-6, n=1e4, mu=mu)
        assert p.rate == pytest.approx(100)
        res = theorem5_check(p, 10.0, 1e-5)
        assert res.in_regime and res.passed
        assert res.deviation <= 1e-4
        assert res.y_final >= res.y_floor

    def test_bound_formula(self):
        p = OdeParams(alpha=0.01, beta=1e-6, n=1e4, mu=0.75)
        res = theorem5_check(p, 10.0, 1e-5)
        assert res.bound == pytest.approx(max(2 * (1 - math.exp(-1e-5)), math.exp(-187.5)), rel=1e-12)
        assert res.bound == pytest.approx(2e-5, rel=1e-4)

    def test_symmetric_exponent(self):
        p = OdeParams(alpha=0.01, beta=0.0, n=100, mu=0.5)
        res = theorem5_check(p, 2.0, 1e-9)
        assert res.bound == pytest.approx(math.exp(-0.25 * p.rate * 2.0), rel=1e-12)

    def test_out_of_regime(self):
        res = theorem5_check(OdeParams(alpha=0.01, beta=0.0, n=10, mu=0.7), 1.0, 0.01)
        assert not res.in_regime and res.passed is None

    def test_precondition(self):
        with pytest.raises(DomainError):
            theorem5_check(OdeParams(alpha=0.01, beta=0.1, n=10, mu=0.7), 1.0, 0.01)


class TestDiscreteVsOde:
    def test_gap_shrinks_with_step(self):
        # all comparisons won by arm 0, so the label update matches the ODE exactly
        data = PairwiseDataset([0] * 10, [1] * 10, [1] * 10, 2)
        gaps = [discrete_vs_ode(data, TrainConfig(alpha=a, beta=a / 2, epochs=int(2 / a)))[0]
                for a in (1e-2, 1e-3, 1e-4)]
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 1e-4

    def test_frozen_labels(self):
        data = sample_pairwise_dataset(ComparisonDistribution.uniform(2), [1.0, 0.0], 20, 3)
        gap, d_disc, traj = discrete_vs_ode(data, TrainConfig(alpha=1e-3, beta=0.0, epochs=2000))
        assert gap < 1e-2
        assert d_disc.size == 2001

    def test_single_sample_stays_near_start(self):
        data = PairwiseDataset([0], [1], [1], 2)
        gap, d_disc, traj = discrete_vs_ode(data, TrainConfig(alpha=1e-3, beta=0.1, epochs=2000))
        assert abs(d_disc[-1]) < 0.02 and abs(traj.d[-1]) < 0.02
        assert gap < 1e-3

    def test_requires_two_arms(self):
        data = PairwiseDataset([0], [2], [1], 3)
        with pytest.raises(ConfigurationError):
            discrete_vs_ode(data, TrainConfig(epochs=5))

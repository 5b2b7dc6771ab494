import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate, stats

from drivers.exceptions import StepTooLarge
from drivers.paths import DriverPath
from drivers.simulate import simulate_driver, simulate_driver_batch
from loewner.exceptions import NotReached, SwallowedPoint
from loewner.observables import LoewnerObservables, evolve_batch, evolve_observables
from loewner.trace import trace_points
from qdiff.jacobi import q_diffusion_spec, transition_density
from spectrum.exceptions import ParameterError
from spectrum.params import SleParams, spectrum_params

from .clock import c_star, radial_clock, tilde_log_gprime, time_sandwich
from .events import GoodEventParams, good_event_indicator, martingale_value, setbounds_holds
from .exceptions import ClockStallWarning, StepRejectedWarning
from .tilted import (
    TiltedPath, drift_coefficients, q_star, simulate_tilted, simulate_tilted_batch, unweighted_q_sde,
    unweighted_q_sde_batch,
)


def zero_driver_observables(t_max=1.0, dt=1e-4, x_r=0.0):
    n = int(round(t_max / dt))
    return evolve_observables(DriverPath(dt=dt, w=np.zeros(n + 1), v=None, a=1.0, x_r=x_r), 1.0)


class TestRadialClock:
    def test_starts_at_origin(self, hitting_params):
        """Test s_0 = 0 at t_0 = 0."""
        obs = evolve_observables(simulate_driver(hitting_params, 1e-3, 1.0, seed=3), 1.0)
        clock = radial_clock(obs)
        assert clock.rule == 'slit'
        assert clock.s[0] == 0.0
        assert clock.t[0] == 0.0
        assert clock.t_of(0.0) == 0.0

    @pytest.mark.parametrize('seed', [0, 1])
    def test_slit_rule_on_simulated_paths(self, hitting_params, seed):
        """Test delta_{t~(s)} e^{as} / (x - x_r) = 1 on the grid as dt is halved twice."""
        for dt in (4e-4, 2e-4, 1e-4):
            obs = evolve_observables(simulate_driver(hitting_params, dt, 1.0, seed=seed), 1.0)
            clock = radial_clock(obs)
            ratio = obs.delta[:len(clock.t)] * np.exp(obs.a * clock.s) / (obs.x - obs.x_r)
            # rounding in g - V grows like 1/v once x is nearly swallowed
            resolved = obs.v[:len(clock.t)] > 1e-4
            assert resolved.sum() > 100
            assert np.max(np.abs(ratio[resolved] - 1.0)) < 1e-6

    def test_slit_rule_ignores_delta(self, hitting_params):
        """Test that the default clock is built from g, V and the frozen driver, not from delta."""
        obs = evolve_observables(simulate_driver(hitting_params, 1e-3, 1.0, seed=7), 1.0)
        clock = radial_clock(obs)
        flattened = replace(obs, delta=np.ones_like(obs.delta))
        np.testing.assert_array_equal(radial_clock(flattened).s, clock.s)

    def test_slit_rule_between_grid_times(self, hitting_params):
        """Test the identity at off-grid radial times with log-linear delta."""
        obs = evolve_observables(simulate_driver(hitting_params, 1e-3, 1.0, seed=5), 1.0)
        clock = radial_clock(obs)
        s = np.linspace(0.0, 0.5 * clock.s_max, 9)
        t = clock.t_of(s)
        delta = np.exp(np.interp(t, clock.t, np.log(obs.delta[:len(clock.t)])))
        np.testing.assert_allclose(delta, (obs.x - obs.x_r) * np.exp(-obs.a * s), rtol=1e-6)
        np.testing.assert_allclose(clock.s_of(t), s, atol=1e-10)

    def test_zero_driver_closed_form(self):
        """Test s(t) = -log(1 + 2t - sqrt(2t(1 + 2t))) for W = 0, a = 1, x = 1."""
        obs = zero_driver_observables()
        clock = radial_clock(obs)
        t = clock.t[-1]
        assert clock.s_max == pytest.approx(-math.log(1 + 2 * t - math.sqrt(2 * t * (1 + 2 * t))), rel=1e-9)

    def test_offset_force_point_closed_form(self):
        """Test the slit rule against -log(delta/delta_0)/a for W = 0 and x_r = 1/2."""
        obs = zero_driver_observables(x_r=0.5)
        t = obs.t
        g = np.sqrt(1 + 2 * t)
        delta = (g - np.sqrt(0.25 + 2 * t)) * g
        np.testing.assert_allclose(radial_clock(obs).s, -np.log(delta / 0.5), rtol=1e-9, atol=1e-12)

    def test_trapezoid_rule_converges(self):
        """Test second-order convergence of the trapezoid rule away from the force point."""
        errors = []
        for dt in (2e-3, 1e-3):
            obs = zero_driver_observables(dt=dt, x_r=0.5)
            exact = radial_clock(obs)
            trapezoid = radial_clock(obs, rule='trapezoid')
            assert trapezoid.s[0] == 0.0
            assert np.all(np.diff(trapezoid.s) >= 0)
            errors.append(abs(trapezoid.s_max - exact.s_max))
        assert errors[0] < 1e-4
        assert errors[1] <= 0.5 * errors[0]

    def test_trapezoid_rule_near_the_force_point(self):
        """Test that steps starting at V = W are integrated in closed form."""
        obs = zero_driver_observables()
        trapezoid = radial_clock(obs, rule='trapezoid')
        assert trapezoid.s_max == pytest.approx(radial_clock(obs).s_max, rel=1e-2)

    def test_recomputed_gprime(self):
        """Test -a * integral of (1 - Q~)/Q~ against log g' resampled through the clock."""
        obs = zero_driver_observables()
        clock = radial_clock(obs)
        s_grid = np.linspace(0.0, 0.95 * clock.s_max, 400)
        np.testing.assert_allclose(
            tilde_log_gprime(clock, obs, s_grid), clock.resample(obs.log_gprime, s_grid), atol=5e-3,
        )

    def test_uniform_grid(self):
        """Test the uniform s-grid pairs."""
        clock = radial_clock(zero_driver_observables(t_max=0.1, dt=1e-3))
        s_grid, t_grid = clock.uniform(0.01)
        assert s_grid[0] == 0.0
        assert np.all(np.diff(t_grid) > 0)

    def test_unknown_rule(self):
        """Test that only the slit, trapezoid and delta rules exist."""
        with pytest.raises(ParameterError):
            radial_clock(zero_driver_observables(t_max=0.01, dt=1e-3), rule='simpson')

    def test_out_of_range(self):
        """Test NotReached beyond the end of the clock."""
        clock = radial_clock(zero_driver_observables(t_max=0.01, dt=1e-3))
        with pytest.raises(NotReached):
            clock.t_of(clock.s_max + 1.0)

    def test_stall_is_reported(self):
        """Test ClockStallWarning when delta does not move over a step."""
        t = np.arange(4) * 0.1
        obs = LoewnerObservables(
            x=1.0, x_r=0.0, a=1.0, dt=0.1, t=t, g=np.ones(4), force=np.zeros(4), f=np.ones(4),
            log_gprime=np.zeros(4), v=np.ones(4), delta=np.array([1.0, 0.5, 0.5, 0.25]),
            q=np.full(4, 0.5), swallow_time=None, driver=None,
        )
        with pytest.warns(ClockStallWarning):
            clock = radial_clock(obs, rule='delta')
        assert clock.t_of(0.5 * math.log(2)) == pytest.approx(0.05)


class TestTimeSandwich:
    def test_c_star(self):
        """Test C* = max((log x + log 4)/a, (log 4 - log(x - x_r))/a)."""
        assert c_star(1.0, 0.0, 1.0) == pytest.approx(math.log(4))
        assert c_star(2.0, 0.5, 0.5) == pytest.approx(2 * math.log(8))

    def test_sandwich_holds_on_paths(self, hitting_params):
        """Test t~((s/a - C*) v 0) <= tau_s <= t~(s/a + C*) on reached paths."""
        for seed in range(4):
            driver = simulate_driver(hitting_params, 1e-3, 2.0, seed=seed)
            obs = evolve_observables(driver, 1.0)
            try:
                bounds = time_sandwich(obs, 1.0, trace=trace_points(driver, 1e-3))
            except NotReached:
                continue
            assert bounds.holds


class TestTiltedPaths:
    def test_initial_row(self):
        """Test s_max = 0: q0, L~ = 0 and M~_0 = x^-mu (x - x_r)^(-mu rho/2)."""
        params = SleParams(kappa=2.0, rho=-1.5, x=2.0, x_r=0.5)
        sp = spectrum_params(params, 0.0)
        tp = simulate_tilted(params, sp, 1e-3, 0.0, seed=1)
        assert len(tp.q) == 1
        assert tp.q[0] == pytest.approx(0.75)
        assert tp.l[0] == 0.0
        assert tp.m_weight[0] == pytest.approx(2.0 ** -1.5 * 1.5 ** 1.125)

    def test_drift_zero_matches_invariant_mean(self, worked_params, worked_spectrum):
        """Test Q~* = 1.25/1.5, the mean of Beta(2.5, 0.5)."""
        assert q_star(worked_params, worked_spectrum) == pytest.approx(2.5 / 3.0)

    def test_unweighted_drift_at_one(self, worked_params):
        """Test that the unweighted drift at q = 1 is -a(2 + rho)/2."""
        drift_a, drift_b = drift_coefficients(worked_params)
        assert drift_a - drift_b == pytest.approx(-worked_params.a * (2 + worked_params.rho) / 2)

    def test_path_invariants(self, worked_params, worked_spectrum):
        """Test q in (0, 1], L~ nondecreasing from 0 and a positive weight."""
        tp = simulate_tilted(worked_params, worked_spectrum, 1e-3, 2.0, seed=4)
        assert len(tp.q) == 2001
        assert np.all((tp.q > 0) & (tp.q <= 1))
        assert tp.l[0] == 0.0
        assert np.all(np.diff(tp.l) >= 0)
        assert np.all(tp.m_weight > 0)
        assert tp.csv_header == ['s', 'q', 'l', 'm_weight']

    def test_ergodic_average(self, worked_params, worked_spectrum):
        """Test L~_s / s -> beta(1 + rho/2) = 1/3 and Q~ near its invariant mean."""
        q, l = simulate_tilted_batch(worked_params, worked_spectrum, 1e-3, 30.0, seed=6,
                                     path_indices=range(200), record_s=[30.0])
        target = worked_spectrum.beta * (1 + worked_params.rho / 2)
        assert target == pytest.approx(1 / 3)
        assert np.mean(l[0] / 30.0) == pytest.approx(target, rel=0.1)
        assert np.mean(q[0]) == pytest.approx(2.5 / 3.0, abs=0.05)

    def test_batch_matches_single_path(self, worked_params, worked_spectrum):
        """Test that recorded columns agree with the full single-path series."""
        q, l = simulate_tilted_batch(worked_params, worked_spectrum, 1e-3, 1.0, seed=8,
                                     path_indices=[0, 1, 2], record_s=[0.5, 1.0])
        tp = simulate_tilted(worked_params, worked_spectrum, 1e-3, 1.0, seed=8, path_index=1)
        assert q[0, 1] == tp.q[500]
        assert l[1, 1] == tp.l[1000]

    def test_step_guard(self, worked_params, worked_spectrum):
        """Test that ds above 1e-3 is refused."""
        with pytest.raises(StepTooLarge):
            simulate_tilted(worked_params, worked_spectrum, 1e-2, 1.0, seed=0)

    def test_recorded_times_in_range(self, worked_params, worked_spectrum):
        """Test that recorded radial times must lie inside the horizon."""
        with pytest.raises(ParameterError):
            simulate_tilted_batch(worked_params, worked_spectrum, 1e-3, 1.0, seed=0,
                                  path_indices=[0], record_s=[2.0])

    def test_marginal_matches_transition_density(self, worked_params, worked_spectrum):
        """Test the law of Q~_1 from q0 = 1 against the Jacobi transition density (chi-square in theta)."""
        n_paths = 20000
        with warnings.catch_warnings():
            warnings.simplefilter('error', StepRejectedWarning)
            q, _ = simulate_tilted_batch(worked_params, worked_spectrum, 1e-3, 1.0, seed=12,
                                         path_indices=range(n_paths), record_s=[1.0])
        spec = q_diffusion_spec(worked_params, worked_spectrum.mu)

        def angle_density(theta):
            return transition_density(spec, 1.0, 1.0, math.sin(theta) ** 2) * math.sin(2 * theta)

        edges = list(np.linspace(0.0, math.pi / 2, 11))
        probs = [integrate.quad(angle_density, lo, hi)[0] for lo, hi in zip(edges[:-1], edges[1:])]
        # pool the sparse bins near q = 0
        while probs[0] * n_paths < 50:
            probs[1] += probs.pop(0)
            edges.pop(1)
        observed, _ = np.histogram(np.arcsin(np.sqrt(q[0])), bins=edges)
        expected = np.array(probs) / np.sum(probs) * n_paths
        assert observed.sum() == n_paths
        assert stats.chisquare(observed, expected).pvalue > 1e-3

    def test_floor_hits_are_reported(self, worked_params, worked_spectrum):
        """Test StepRejectedWarning when the floor is set above most of the mass."""
        with pytest.warns(StepRejectedWarning):
            simulate_tilted_batch(worked_params, worked_spectrum, 1e-3, 0.5, seed=3, path_indices=range(20),
                                  q_floor=0.999)

    def test_unweighted_absorbs_at_zero(self, worked_params):
        """Test absorption when the unweighted drift is negative on all of [0, 1]."""
        q, l = unweighted_q_sde_batch(worked_params, 1e-3, 10.0, seed=2, path_indices=range(50), record_s=[0.0, 10.0])
        assert np.all(q[0] == 1.0)
        absorbed = q[1] == 0.0
        assert absorbed.any()
        assert np.all(np.isinf(l[1][absorbed]))

    def test_unweighted_initial_value(self):
        """Test q_0 = (x - x_r)/x without a weight."""
        params = SleParams(kappa=3.0, rho=-1.0, x=1.0, x_r=0.25)
        tp = unweighted_q_sde(params, 1e-3, 0.0, seed=0)
        assert tp.q[0] == pytest.approx(0.75)
        assert tp.m_weight is None


class TestGoodEvent:
    def linear_path(self, params, sp, boost=0.0):
        ds = 0.01
        s = np.arange(2001) * ds
        slope = sp.beta * (1 + params.rho / 2)
        return TiltedPath(ds=ds, q=np.ones_like(s), l=slope * s + boost, m_weight=None, seed=0,
                          params=params, sp=sp)

    def test_linear_path(self, worked_params, worked_spectrum):
        """Test indicator 1 with margin c on the exact linear path."""
        gep = GoodEventParams(u=5.0, c_const=1.0, lambda_boost=0.0)
        event = good_event_indicator(self.linear_path(worked_params, worked_spectrum), gep, 20.0)
        assert event.indicator == 1
        assert event.margin == pytest.approx(1.0)

    def test_violated_band(self, worked_params, worked_spectrum):
        """Test indicator 0 and a negative margin far off the line."""
        gep = GoodEventParams.defaults()
        event = good_event_indicator(self.linear_path(worked_params, worked_spectrum, boost=100.0), gep, 20.0)
        assert event.indicator == 0
        assert event.margin < 0

    def test_window_must_be_covered(self, worked_params, worked_spectrum):
        """Test that t_max beyond the path end is refused."""
        with pytest.raises(ParameterError):
            good_event_indicator(self.linear_path(worked_params, worked_spectrum), GoodEventParams.defaults(), 50.0)

    def test_params(self):
        """Test defaults and the u > 0 guard."""
        gep = GoodEventParams.defaults()
        assert (gep.u, gep.c_const, gep.lambda_boost) == (5.0, 1.0, 4.0)
        with pytest.raises(ParameterError):
            GoodEventParams(u=0.0, c_const=1.0, lambda_boost=0.0)

    def test_rate_and_sandwich_on_tilted_paths(self, worked_params, worked_spectrum):
        """Test a high indicator rate and the g~' sandwich on every good path."""
        gep = GoodEventParams.defaults()
        q, l = simulate_tilted_batch(worked_params, worked_spectrum, 1e-3, 10.0, seed=10, path_indices=range(20))
        indicators = []
        for i in range(20):
            tp = TiltedPath(ds=1e-3, q=q[:, i], l=l[:, i], m_weight=None, seed=10, path_index=i,
                            params=worked_params, sp=worked_spectrum)
            event = good_event_indicator(tp, gep, 10.0)
            indicators.append(event.indicator)
            if event.indicator:
                assert setbounds_holds(tp, gep, 10.0)
        assert np.mean(indicators) >= 0.9


class TestMartingaleValue:
    def test_initial_value(self):
        """Test M_0 = x^-mu (x - x_r)^(-mu rho/2)."""
        params = SleParams(kappa=2.0, rho=-1.5, x=2.0, x_r=0.5)
        sp = spectrum_params(params, 0.0)
        obs = evolve_observables(simulate_driver(params, 1e-3, 0.1, seed=0), 2.0)
        assert martingale_value(obs, sp, 0.0) == pytest.approx(2.0 ** -1.5 * 1.5 ** 1.125)

    def test_zero_zeta_drops_gprime(self, worked_params, worked_spectrum):
        """Test M_t = Q^mu delta^(-mu(1+rho/2)) when zeta = 0."""
        obs = evolve_observables(simulate_driver(worked_params, 1e-3, 0.2, seed=1), 1.0)
        k = obs.index_at(0.1)
        mu = worked_spectrum.mu
        expected = obs.q[k] ** mu * obs.delta[k] ** (-mu * (1 + worked_params.rho / 2))
        assert martingale_value(obs, worked_spectrum, 0.1) == pytest.approx(expected)

    def test_past_swallowing(self, worked_params, worked_spectrum):
        """Test SwallowedPoint at or after T_x."""
        dt = 1e-3
        driver = DriverPath(dt=dt, w=4.0 * np.arange(501) * dt, v=None, a=1.0, params=worked_params)
        obs = evolve_observables(driver, 0.5)
        with pytest.raises(SwallowedPoint):
            martingale_value(obs, worked_spectrum, 0.49)

    def test_absorbed_at_zero(self, worked_params, worked_spectrum):
        """Test M_t = 0 on a row where Q has reached 0."""
        t = np.array([0.0, 0.1])
        obs = LoewnerObservables(
            x=1.0, x_r=0.0, a=1.0, dt=0.1, t=t, g=np.array([1.0, 1.2]), force=np.array([0.0, 1.2]),
            f=np.array([1.0, 0.5]), log_gprime=np.array([0.0, -0.3]), v=np.array([1.0, 0.0]),
            delta=np.array([1.0, 0.4]), q=np.array([1.0, 0.0]), swallow_time=None, driver=None,
            params=worked_params,
        )
        assert martingale_value(obs, worked_spectrum, 0.1) == 0.0
        assert martingale_value(obs, worked_spectrum, 0.0) == pytest.approx(1.0)

    def test_mean_is_conserved(self):
        """Test E[M_t] = M_0 within Monte Carlo error on a short horizon."""
        params = SleParams(kappa=2.0, rho=-1.5, x=1.0, x_r=0.5)
        sp = spectrum_params(params, 0.0)
        w, _ = simulate_driver_batch(params, 1e-3, 0.1, seed=14, path_indices=range(400))
        batch = evolve_batch(w, 1e-3, params.a, params.x, params.x_r)
        exponent = sp.mu * (1 + params.rho / 2)
        m = batch.q[-1] ** sp.mu * batch.delta[-1] ** -exponent
        m = m[np.isfinite(m)]
        m0 = params.x ** -sp.mu * (params.x - params.x_r) ** (-sp.mu * params.rho / 2)
        se = m.std(ddof=1) / math.sqrt(len(m))
        assert abs(m.mean() - m0) < 4 * se + 0.02 * m0

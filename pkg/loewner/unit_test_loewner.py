import math

import numpy as np
import pytest

from drivers.paths import DriverPath, MultiForceConfig
from drivers.simulate import simulate_driver
from spectrum.exceptions import ParameterError
from spectrum.params import SleParams

from .exceptions import NotReached, Swallowed, SwallowedPoint
from .maps import slit_driver, slit_step, slit_step_inverse
from .observables import (
    evolve_batch, evolve_observables, force_point_martingale, harmonic_measure_infinity, iter_flow,
    rightmost_swallowed,
)
from .trace import TracePolyline, distance_to_trace, hitting_time, trace_points


def fixed_driver(w, dt, a=1.0, x_r=0.0):
    return DriverPath(dt=dt, w=np.asarray(w, dtype=float), v=None, a=a, x_r=x_r)


class TestSlitStep:
    def test_zero_step_is_identity(self):
        """Test that dtau=0 leaves (g, g') unchanged."""
        g, gp = slit_step(1.7, 0.3, 0.2, 1.0, 0.0)
        assert g == pytest.approx(1.7, rel=1e-15)
        assert gp == pytest.approx(0.3, rel=1e-15)

    def test_closed_form_example(self):
        """Test g=1, w=0, a=1, dtau=0.5 against sqrt(2)."""
        g, gp = slit_step(1.0, 1.0, 0.0, 1.0, 0.5)
        assert g == pytest.approx(math.sqrt(2), rel=1e-15)
        assert gp == pytest.approx(1 / math.sqrt(2), rel=1e-15)

    def test_two_half_steps_equal_one_step(self):
        """Test capacity additivity with a frozen driver."""
        g1, gp1 = slit_step(2.3, 1.0, 0.4, 0.8, 0.3)
        g_half, gp_half = slit_step(2.3, 1.0, 0.4, 0.8, 0.15)
        g2, gp2 = slit_step(g_half, gp_half, 0.4, 0.8, 0.15)
        assert g2 == pytest.approx(g1, rel=1e-14)
        assert gp2 == pytest.approx(gp1, rel=1e-14)

    def test_point_left_of_driver_is_swallowed(self):
        """Test that a real point at or left of the driver raises Swallowed."""
        with pytest.raises(Swallowed):
            slit_step(0.5, 1.0, 0.5, 1.0, 0.1)

    def test_negative_step_rejected(self):
        """Test that a negative capacity step is refused."""
        with pytest.raises(ParameterError):
            slit_step(1.0, 1.0, 0.0, 1.0, -0.1)

    def test_complex_points_stay_in_upper_half_plane(self):
        """Test forward and inverse maps on interior points."""
        z = np.array([0.3 + 0.01j, -2 + 1j, 5j])
        forward, _ = slit_step(z, np.ones(3), 0.1, 1.0, 0.2)
        assert np.all(forward.imag > 0)
        back = slit_step_inverse(forward, 0.1, 1.0, 0.2)
        np.testing.assert_allclose(back, z, rtol=1e-12, atol=1e-12)


class TestSlitDriver:
    def test_carries_the_force_point(self):
        """Test that each frozen value maps V_k onto V_{k+1}."""
        w = np.array([0.0, -0.05, 0.02, 0.3])
        v = np.array([0.5, 0.52, 0.55, 0.9])
        frozen = slit_driver(w, v, 1.0, 1e-3)
        for k in range(2):
            image, _ = slit_step(v[k], 1.0, frozen[k], 1.0, 1e-3)
            assert image == pytest.approx(v[k + 1], rel=1e-12)
        # dV = 0.35 exceeds sqrt(2 a dt): the force point starts on the driver
        assert frozen[2] == pytest.approx(0.9 - math.sqrt(2e-3))

    def test_stalled_force_point_uses_midpoint(self):
        """Test the midpoint fallback when V does not advance."""
        frozen = slit_driver(np.array([0.0, 0.2]), np.array([1.0, 1.0]), 1.0, 1e-3)
        np.testing.assert_allclose(frozen, [0.1])

    def test_shape_mismatch(self):
        """Test that W and V must share a shape."""
        with pytest.raises(ParameterError):
            slit_driver(np.zeros(3), np.zeros(4), 1.0, 1e-3)

    def test_flowed_force_point_is_the_driver_force_point(self):
        """Test g_t(x_r) = V_t along a simulated one-point driver."""
        params = SleParams(kappa=3.0, rho=-1.0, x=2.0, x_r=0.5)
        driver = simulate_driver(params, 1e-3, 0.5, seed=2)
        obs = evolve_observables(driver, 2.0)
        np.testing.assert_allclose(obs.force, driver.v[:len(obs.t)], rtol=1e-9)
        assert np.all(obs.q <= 1.0)


class TestObservables:
    def test_initial_row(self):
        """Test (f, g', v, delta, q) at t=0 with a positive force point."""
        params = SleParams(kappa=2.0, rho=-1.0, x=1.0, x_r=0.5)
        driver = simulate_driver(params, 1e-3, 0.1, seed=3)
        obs = evolve_observables(driver, 1.0)
        assert obs.f[0] == 1.0
        assert obs.log_gprime[0] == 0.0
        assert obs.v[0] == pytest.approx(0.5)
        assert obs.delta[0] == pytest.approx(0.5)
        assert obs.q[0] == pytest.approx(0.5)

    def test_zero_driver_matches_closed_form(self):
        """Test g_t(x) = sqrt(x^2 + 2at) when W is identically 0."""
        dt = 1e-3
        obs = evolve_observables(fixed_driver(np.zeros(1001), dt, a=0.5), 1.0)
        t = obs.t
        np.testing.assert_allclose(obs.g, np.sqrt(1 + t), rtol=1e-12)
        np.testing.assert_allclose(obs.log_gprime, -0.5 * np.log(1 + t), rtol=1e-10, atol=1e-14)
        assert obs.swallow_time is None

    def test_gprime_nonincreasing_and_q_in_unit_interval(self):
        """Test monotone g' and 0 <= q <= 1 along simulated paths."""
        for seed in range(3):
            driver = simulate_driver(SleParams(kappa=2.0, rho=0.0), 1e-3, 1.0, seed=seed)
            obs = evolve_observables(driver, 0.5)
            assert np.all(np.diff(obs.log_gprime) <= 0)
            assert np.all(obs.log_gprime <= 0)
            assert np.all((obs.q >= 0) & (obs.q <= 1))
            assert np.all(obs.f > 0)

    def test_delta_nonincreasing(self, worked_params):
        """Test that delta never grows along a boundary-hitting path."""
        driver = simulate_driver(worked_params, 1e-3, 1.0, seed=11)
        obs = evolve_observables(driver, 1.0)
        assert np.all(np.diff(obs.delta) <= 1e-12)

    def test_gprime_matches_integral_of_f(self):
        """Test log g' against the trapezoid integral of -a/f^2 on a smooth driver."""
        gaps = []
        for dt in (2e-3, 1e-3):
            n = int(round(0.5 / dt))
            w = 0.3 * np.arange(n + 1) * dt
            obs = evolve_observables(fixed_driver(w, dt), 1.0)
            integral = -np.trapezoid(1.0 / obs.f ** 2, obs.t)
            gaps.append(abs(integral - obs.log_gprime[-1]))
        assert gaps[0] < 1e-3
        assert gaps[1] < 0.75 * gaps[0]

    def test_hydrodynamic_normalization(self):
        """Test |g_t(z) - z| < 2 hcap / |z| far from the hull."""
        params = SleParams(kappa=2.0, rho=0.0)
        driver = simulate_driver(params, 1e-3, 1.0, seed=5)
        z = 100j
        g = z
        for w_step in driver.w_step:
            g, _ = slit_step(g, 1.0, w_step, driver.a, driver.dt)
        assert abs(g - z) < 2 * driver.a * driver.t_max / abs(z)

    def test_swallowed_point_stops_series(self):
        """Test that a driver running past x swallows it and ends the series."""
        dt = 1e-3
        w = 4.0 * np.arange(501) * dt
        obs = evolve_observables(fixed_driver(w, dt), 0.5)
        assert obs.swallow_time is not None
        assert obs.swallow_time < 0.5
        assert len(obs.t) < 501
        with pytest.raises(SwallowedPoint):
            obs.index_at(obs.swallow_time)

    def test_batch_fills_nan_after_swallowing(self):
        """Test evolve_batch with one swallowed and one surviving point."""
        dt = 1e-3
        w = 4.0 * np.arange(501) * dt
        batch = evolve_batch(w, dt, 1.0, np.array([0.5, 10.0]))
        k = batch.last_index[0]
        assert np.isfinite(batch.swallow_time[0])
        assert np.isinf(batch.swallow_time[1])
        assert np.all(np.isnan(batch.q[k + 1:, 0]))
        assert np.all(np.isfinite(batch.q[:, 1]))

    def test_iter_flow_rejects_points_left_of_force(self):
        """Test that tracked points must lie right of x_r."""
        with pytest.raises(ParameterError):
            next(iter_flow(np.zeros(3), 1e-3, 1.0, 0.2, x_r=0.5))

    def test_csv_layout(self, worked_params):
        """Test observable CSV header and column count."""
        obs = evolve_observables(simulate_driver(worked_params, 1e-3, 0.01, seed=1), 1.0)
        assert obs.csv_header == ['t', 'f', 'log_gprime', 'v', 'delta', 'q']
        assert obs.csv_rows().shape == (len(obs.t), 6)


class TestHarmonicMeasure:
    def test_initial_value(self):
        """Test omega = x/pi at t=0 for x_r=0."""
        obs = evolve_observables(fixed_driver(np.zeros(11), 1e-3), 2.0)
        assert harmonic_measure_infinity(obs, 0.0) == pytest.approx(2.0 / math.pi)

    def test_initial_value_with_offset(self):
        """Test the offset evaluation for x_r > 0 at t=0."""
        obs = evolve_observables(fixed_driver(np.zeros(11), 1e-3, x_r=0.5), 2.0)
        assert harmonic_measure_infinity(obs, 0.0) == pytest.approx(2.0 / math.pi, rel=1e-8)

    def test_equals_v_over_pi_for_zero_force_point(self, worked_params):
        """Test pi * omega = v_t when x_r = 0."""
        obs = evolve_observables(simulate_driver(worked_params, 1e-3, 0.2, seed=2), 1.0)
        t = obs.t[len(obs.t) // 2]
        k = obs.index_at(t)
        assert math.pi * harmonic_measure_infinity(obs, t) == pytest.approx(obs.v[k])

    def test_rightmost_is_zero_before_any_step(self):
        """Test r_0 = 0."""
        assert rightmost_swallowed(fixed_driver(np.zeros(11), 1e-3), 1.0, 0.0) == 0.0

    def test_rightmost_tracks_a_running_driver(self):
        """Test that r_t lies below the swallowed point and above 0."""
        dt = 1e-3
        w = 4.0 * np.arange(501) * dt
        r = rightmost_swallowed(fixed_driver(w, dt), 2.0, 0.5)
        assert 0 < r < 2.0


class TestTrace:
    def test_zero_driver_gives_vertical_slit(self):
        """Test that W=0 traces the imaginary axis at height sqrt(2 a t)."""
        eps = 1e-3
        driver = fixed_driver(np.zeros(201), 1e-3)
        trace = trace_points(driver, eps)
        assert trace.points[0] == 0
        assert np.all(np.abs(trace.points.real) < 2 * eps)
        np.testing.assert_allclose(trace.points.imag[1:], np.sqrt(2 * trace.times[1:]), atol=eps)

    def test_trace_at_time_zero(self):
        """Test that an empty driver gives the single point 0."""
        trace = trace_points(fixed_driver([0.0], 1e-3), 1e-3)
        assert list(trace.points) == [0]

    @pytest.mark.parametrize('eps', [1e-7, 0.5])
    def test_tolerance_range(self, eps):
        """Test that the tip tolerance is restricted to (1e-6, 1e-1)."""
        with pytest.raises(ParameterError):
            trace_points(fixed_driver(np.zeros(3), 1e-3), eps)

    def test_trace_stays_in_upper_half_plane(self, worked_params):
        """Test Im >= 0 on a simulated path."""
        trace = trace_points(simulate_driver(worked_params, 1e-3, 0.3, seed=4), 1e-3)
        assert np.all(trace.points.imag >= 0)

    def test_distance_to_polyline(self):
        """Test running point-to-segment distances."""
        trace = TracePolyline(points=np.array([0, 2j, 2 + 2j]), dt=1.0, tip_tolerance=1e-3)
        np.testing.assert_allclose(distance_to_trace(trace, 3.0), [3.0, 3.0, math.sqrt(5)])

    def test_distance_sandwich(self, worked_params):
        """Test (x - x_r)/(4x) dist <= delta <= 4 dist on nearly every step."""
        driver = simulate_driver(worked_params, 1e-3, 1.0, seed=21)
        obs = evolve_observables(driver, 1.0)
        dist = distance_to_trace(trace_points(driver, 1e-3), 1.0)[:len(obs.t)]
        delta = obs.delta
        ok = (dist / 4 <= delta) & (delta <= 4 * dist)
        assert ok[1:].mean() >= 0.9


class TestHittingTime:
    def test_radial_mode_at_zero(self, worked_params):
        """Test that the radial hitting time of s=0 is 0."""
        obs = evolve_observables(simulate_driver(worked_params, 1e-3, 0.5, seed=8), 1.0)
        assert hitting_time(obs, 0.0, mode='radial') == 0.0

    def test_radial_mode_is_monotone(self, worked_params):
        """Test that hitting times increase with s."""
        obs = evolve_observables(simulate_driver(worked_params, 1e-3, 5.0, seed=9), 1.0)
        times = []
        for s in (0.05, 0.1, 0.2, 0.4, 0.8):
            try:
                times.append(hitting_time(obs, s, mode='radial'))
            except NotReached:
                break
        assert times == sorted(times)

    def test_radial_mode_not_reached(self):
        """Test NotReached when delta levels off (W=0 keeps delta above 1/2)."""
        obs = evolve_observables(fixed_driver(np.zeros(1001), 1e-3), 1.0)
        with pytest.raises(NotReached):
            hitting_time(obs, 2.0, mode='radial')

    def test_trace_mode_on_vertical_slit(self):
        """Test that the vertical slit never comes closer to x=1 than 1."""
        obs = evolve_observables(fixed_driver(np.zeros(101), 1e-3), 1.0)
        with pytest.raises(NotReached):
            hitting_time(obs, 0.5, mode='trace')

    def test_trace_mode_precondition(self):
        """Test that s = 0 is refused in trace mode for x = 1, x_r = 0."""
        obs = evolve_observables(fixed_driver(np.zeros(11), 1e-3), 1.0)
        with pytest.raises(ParameterError):
            hitting_time(obs, 0.0, mode='trace')

    def test_trace_mode_precondition_uses_the_force_point(self):
        """Test that s must exceed -log(x - x_r), not -log x, in trace mode."""
        obs = evolve_observables(fixed_driver(np.zeros(101), 1e-3, x_r=0.5), 1.0)
        with pytest.raises(ParameterError):
            hitting_time(obs, 0.5, mode='trace')
        with pytest.raises(NotReached):
            hitting_time(obs, 0.75, mode='trace')

    def test_unknown_mode(self):
        """Test that only radial and trace modes exist."""
        obs = evolve_observables(fixed_driver(np.zeros(11), 1e-3), 1.0)
        with pytest.raises(ParameterError):
            hitting_time(obs, 0.1, mode='conformal')


class TestForcePointMartingale:
    def test_initial_value(self):
        """Test M_0 from the point positions alone."""
        kappa = 2.0
        cfg = MultiForceConfig(x_right=(0.5, 2.0), rho_right=(1.0, -0.5))
        driver = simulate_driver(SleParams(kappa=kappa, rho=0.0), 1e-3, 0.01, seed=0)
        expected = 0.5 ** (1.0 / kappa) * 2.0 ** (-0.5 / kappa) * 1.5 ** (1.0 * -0.5 / (2 * kappa))
        assert force_point_martingale(driver, kappa, cfg, 0.0) == pytest.approx(expected)

    def test_point_at_origin_rejected(self):
        """Test that a force point at 0 is refused."""
        cfg = MultiForceConfig(x_right=(0.0,), rho_right=(1.0,))
        driver = simulate_driver(SleParams(kappa=2.0, rho=0.0), 1e-3, 0.01, seed=0)
        with pytest.raises(ParameterError):
            force_point_martingale(driver, 2.0, cfg, 0.0)

    def test_mean_is_conserved(self):
        """Test E[M_t] = M_0 within Monte Carlo error."""
        kappa = 2.0
        cfg = MultiForceConfig(x_left=(-1.0,), rho_left=(0.5,), x_right=(1.0,), rho_right=(0.5,))
        params = SleParams(kappa=kappa, rho=0.0)
        values = np.array([
            force_point_martingale(simulate_driver(params, 1e-3, 0.5, seed=17, path_index=i), kappa, cfg, 0.5)
            for i in range(300)
        ])
        m0 = force_point_martingale(simulate_driver(params, 1e-3, 0.0, seed=17), kappa, cfg, 0.0)
        se = values.std(ddof=1) / math.sqrt(len(values))
        assert abs(values.mean() - m0) < 4 * se + 1e-3

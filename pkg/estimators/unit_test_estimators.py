import math

import numpy as np
import pytest

from radial.events import GoodEventParams
from spectrum.dimension import covering_exponent, one_point_prefactor
from spectrum.exceptions import ParameterError
from spectrum.params import spectrum_params, spectrum_params_from_beta

from .audit import AUDIT_CHECKS, distortion_audit
from .boxcount import BoxCountReport, box_count, box_count_indicators, box_midpoints, fit_box_exponent
from .concentration import concentration_profile, good_event_rate
from .exceptions import DegenerateFit, InsufficientSurvivors, ResolutionExceeded
from .moments import (
    MomentEstimate, exact_moments, exponent_fit, moment_series, one_point_moment, target_slope, tilted_moments,
    transient_rate,
)
from .pool import gather, map_blocks, path_blocks, resolve_workers


def _squares(path_indices, offset):
    return np.array([float(p * p + offset) for p in path_indices])


class TestPool:
    def test_blocks(self):
        """Test contiguous blocks covering every path once."""
        blocks = path_blocks(70, 32)
        assert [(b.start, b.stop) for b in blocks] == [(0, 32), (32, 64), (64, 70)]

    def test_no_paths(self):
        """Test that an empty run is refused."""
        with pytest.raises(ParameterError):
            path_blocks(0)

    def test_inline_map_keeps_order(self):
        """Test that gathered block results follow path order."""
        out = gather(map_blocks(_squares, 10, workers=1, block_size=3, offset=1))
        np.testing.assert_array_equal(out, np.arange(10) ** 2 + 1)

    def test_environment_override(self, monkeypatch):
        """Test that SLE_LAB_THREADS wins over the requested worker count."""
        monkeypatch.setenv('SLE_LAB_THREADS', '3')
        assert resolve_workers(8) == 3
        monkeypatch.setenv('SLE_LAB_THREADS', '0')
        assert resolve_workers(2) == 2

    def test_worker_count_does_not_change_results(self, worked_params, worked_spectrum, monkeypatch):
        """Test identical tilted estimates with one and two worker processes."""
        monkeypatch.delenv('SLE_LAB_THREADS', raising=False)
        one = tilted_moments(worked_params, worked_spectrum, [0.2], 64, 1e-3, seed=3, workers=1)
        two = tilted_moments(worked_params, worked_spectrum, [0.2], 64, 1e-3, seed=3, workers=2)
        assert one == two


class TestMomentEstimates:
    def test_initial_value(self, worked_params, worked_spectrum):
        """Test that every method returns 1 at s = 0."""
        exact = exact_moments(worked_params, worked_spectrum, [0.0])[0]
        tilted = tilted_moments(worked_params, worked_spectrum, [0.0], 40, 1e-3, seed=1)[0]
        assert exact.value == pytest.approx(1.0)
        assert exact.stderr == 0.0
        assert tilted.value == pytest.approx(1.0)

    def test_exact_large_s(self, worked_params, worked_spectrum):
        """Test the exact moment against K q0^mu e^{-a mu (1 + rho/2) s} at s = 8."""
        estimate = one_point_moment(worked_params, worked_spectrum, 8.0, 0, 'exact', 0.0, 0)
        k = one_point_prefactor(worked_params, worked_spectrum)
        expected = k * math.exp(target_slope(worked_params, worked_spectrum) * 8.0)
        assert estimate.value == pytest.approx(expected, rel=1e-4)
        assert estimate.method == 'exact'

    def test_tilted_matches_exact(self, worked_params, worked_spectrum):
        """Test the Girsanov estimator against the exact value at s = 1."""
        tilted = tilted_moments(worked_params, worked_spectrum, [1.0], 2000, 1e-3, seed=11)[0]
        exact = exact_moments(worked_params, worked_spectrum, [1.0])[0]
        assert abs(tilted.value - exact.value) < 4 * tilted.stderr + 0.1 * exact.value

    def test_direct_matches_exact(self, worked_params, worked_spectrum):
        """Test the full-chain estimator of P(t~(s) < infinity) at zeta = 0 within 10% for s up to 3."""
        s_values = [0.5, 1.0, 2.0, 3.0]
        direct = moment_series(worked_params, worked_spectrum, s_values, 'direct', 500, 5e-4, 5, t_max=8.0)
        exact = exact_moments(worked_params, worked_spectrum, s_values)
        for d, e in zip(direct, exact):
            assert 0 < d.value <= 1
            assert abs(d.value - e.value) < 0.1 * e.value + 3 * d.stderr

    def test_insufficient_survivors(self, worked_params, worked_spectrum):
        """Test that fewer than 100 surviving paths raise InsufficientSurvivors."""
        with pytest.raises(InsufficientSurvivors):
            moment_series(worked_params, worked_spectrum, [1.0], 'direct', 20, 5e-3, 2, t_max=2.0)

    def test_unknown_method(self, worked_params, worked_spectrum):
        """Test the method name check."""
        with pytest.raises(ParameterError):
            moment_series(worked_params, worked_spectrum, [1.0], 'bootstrap')

    def test_negative_radial_time(self, worked_params, worked_spectrum):
        """Test s >= 0."""
        with pytest.raises(ParameterError):
            exact_moments(worked_params, worked_spectrum, [-1.0])


class TestExponentFit:
    def test_synthetic_series(self):
        """Test that e^{-0.7 s} gives slope -0.7."""
        series = [MomentEstimate(s, math.exp(-0.7 * s), 0.0, 0, 'exact') for s in range(1, 7)]
        fit = exponent_fit(series)
        assert fit.slope == pytest.approx(-0.7, abs=1e-12)
        assert fit.intercept == pytest.approx(0.0, abs=1e-12)
        assert fit.r2 == pytest.approx(1.0)

    @pytest.mark.parametrize('zeta', [0.0, 0.3])
    def test_exact_series_rate_and_prefactor(self, worked_params, zeta):
        """Test slope within 1% of -a mu (1 + rho/2) and prefactor within 10% of K q0^mu over s = 1..8."""
        sp = spectrum_params(worked_params, zeta)
        series = exact_moments(worked_params, sp, range(1, 9))
        fit = exponent_fit(series, transient_rate=transient_rate(worked_params, sp))
        assert fit.slope == pytest.approx(target_slope(worked_params, sp), rel=0.01)
        prefactor = one_point_prefactor(worked_params, sp) * worked_params.q0 ** sp.mu
        assert math.exp(fit.intercept) == pytest.approx(prefactor, rel=0.1)

    def test_transient_is_separated_from_the_slope(self):
        """Test that e^{-0.4 s}(1 - 0.8 e^{-1.5 s}) gives slope -0.4 and intercept 0."""
        series = [MomentEstimate(s, math.exp(-0.4 * s) * (1 - 0.8 * math.exp(-1.5 * s)), 0.0, 0, 'exact')
                  for s in range(1, 9)]
        plain = exponent_fit(series)
        fit = exponent_fit(series, transient_rate=1.5)
        assert abs(plain.slope + 0.4) > 0.005
        assert fit.slope == pytest.approx(-0.4, abs=1e-4)
        assert fit.intercept == pytest.approx(0.0, abs=1e-4)
        assert fit.r2 == pytest.approx(1.0)

    def test_transient_rate(self, worked_params, worked_spectrum):
        """Test the spectral gap 1 - a + mu = 1.5 of the worked example."""
        assert transient_rate(worked_params, worked_spectrum) == pytest.approx(1.5)

    def test_identical_values(self):
        """Test DegenerateFit for a flat series."""
        series = [MomentEstimate(s, 0.5, 0.0, 0, 'exact') for s in range(5)]
        with pytest.raises(DegenerateFit):
            exponent_fit(series)

    def test_too_few_points(self):
        """Test that fewer than five estimates are refused."""
        series = [MomentEstimate(s, math.exp(-s), 0.0, 0, 'exact') for s in range(3)]
        with pytest.raises(ParameterError):
            exponent_fit(series)


class TestBoxCount:
    def test_midpoints(self):
        """Test ceil(2e) intervals of [1, 2] at n = 1."""
        x = box_midpoints(1)
        assert len(x) == 6
        assert np.all((x > 1) & (x < 2))
        np.testing.assert_allclose(np.diff(x), 1 / 6)

    def test_resolution_guard(self, hitting_params):
        """Test ResolutionExceeded when e^-n < 10 sqrt(dt)."""
        sp = spectrum_params(hitting_params, 0.0)
        with pytest.raises(ResolutionExceeded):
            box_count(hitting_params, sp, 5, 4, 1e-3, seed=0)
        with pytest.raises(ParameterError):
            box_count(hitting_params, sp, 11, 4, 1e-9, seed=0)

    def test_curve_far_away(self, hitting_params):
        """Test zero counts when the curve stays near the origin."""
        sp = spectrum_params(hitting_params, 0.0)
        report = box_count(hitting_params, sp, 4, 8, 1e-4, seed=2, t_max=0.01, resolution_factor=1.0)
        assert report.grid_size == math.ceil(2 * math.exp(4))
        assert report.count_upper == 0
        assert report.count_lower == 0
        assert report.n_paths == 8

    def test_monotone_in_beta(self, hitting_params):
        """Test that the upper set grows and the lower set shrinks with beta, path by path."""
        small = spectrum_params_from_beta(hitting_params, 0.5)
        large = spectrum_params_from_beta(hitting_params, 2.0)
        kwargs = {'t_max': 1.0, 'resolution_factor': 1.0}
        first = box_count_indicators(hitting_params, small, 3, 8, 1e-4, seed=4, **kwargs)
        second = box_count_indicators(hitting_params, large, 3, 8, 1e-4, seed=4, **kwargs)
        assert first.upper.shape == (8, math.ceil(2 * math.exp(3)))
        assert np.all(first.upper <= second.upper)
        assert np.all(second.lower <= first.lower)

    def test_fit(self, hitting_params):
        """Test the log-linear count fit and its target exponent."""
        sp = spectrum_params(hitting_params, 0.0)
        reports = [
            BoxCountReport(n=n, beta=sp.beta, grid_size=100, upper_counts=np.array([math.exp(0.5 * n)]),
                           lower_counts=np.array([0]))
            for n in range(3, 8)
        ]
        fit = fit_box_exponent(reports, hitting_params, sp)
        assert fit.slope == pytest.approx(0.5)
        assert fit.target == pytest.approx(covering_exponent(hitting_params, sp))

    def test_fit_zero_count(self):
        """Test DegenerateFit when a level has no counts."""
        reports = [BoxCountReport(n, 1.0, 10, np.array([c]), np.array([0])) for n, c in ((3, 0), (4, 2))]
        with pytest.raises(DegenerateFit):
            fit_box_exponent(reports)


class TestDistortionAudit:
    def test_initial_time(self, hitting_params):
        """Test that both distortion bounds hold at t = 0 on every path."""
        report = distortion_audit(hitting_params, 3, 1e-3, seed=1, t_max=0.1, n_times=1, s_values=())
        assert [row.check for row in report.rows] == list(AUDIT_CHECKS)
        assert report['distance_bounds'].samples == 3
        assert report['koebe_harmonic'].samples == 3
        assert report['time_sandwich'].samples == 0
        assert report.max_fraction == 0.0

    def test_violations_are_rare(self, hitting_params):
        """Test small violation fractions along short curves."""
        report = distortion_audit(hitting_params, 4, 1e-3, seed=6, t_max=0.5, n_times=10, s_values=(0.5, 1.0))
        assert report['distance_bounds'].samples > 4
        for row in report.rows:
            assert 0 <= row.violations <= row.samples
        assert report['distance_bounds'].fraction <= 0.1
        assert report['koebe_harmonic'].fraction <= 0.1
        assert len(report.csv_rows()) == 3


class TestConcentration:
    def test_profile_is_bounded(self, worked_params, worked_spectrum):
        """Test E*[exp(p |L~_t - beta(1+rho/2) t| / sqrt t)] stays moderate as t grows."""
        profile = concentration_profile(worked_params, worked_spectrum, [1.0, 2.0, 4.0], 0.1, 200, 1e-3, seed=8)
        assert [point.t for point in profile] == [1.0, 2.0, 4.0]
        for point in profile:
            assert 1.0 <= point.mean < 20.0
            assert point.stderr >= 0

    def test_profile_times(self, worked_params, worked_spectrum):
        """Test t > 0."""
        with pytest.raises(ParameterError):
            concentration_profile(worked_params, worked_spectrum, [0.0], 0.5, 10, 1e-3, seed=8)

    def test_good_event_rate(self, worked_params, worked_spectrum):
        """Test that the default band almost always holds and a vanishing band almost never does."""
        wide = good_event_rate(worked_params, worked_spectrum, None, 2.0, 100, 1e-3, seed=9)
        assert wide.rate >= 0.9
        narrow = GoodEventParams(u=1e-6, c_const=0.0, lambda_boost=0.0)
        assert good_event_rate(worked_params, worked_spectrum, narrow, 2.0, 100, 1e-3, seed=9).rate <= 0.05

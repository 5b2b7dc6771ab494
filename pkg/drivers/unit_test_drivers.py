import math
import warnings

import numpy as np
import pytest
from scipy import special, stats

from spectrum.exceptions import ParameterError
from spectrum.params import SleParams

from .exceptions import ForcePointCollision, NonHittingRegimeWarning, StepTooLarge
from .paths import DriverPath, MultiForceConfig
from .simulate import (
    _MultiPointState, _advance, bessel_gap_step, n_steps_for, simulate_driver, simulate_driver_batch,
    simulate_driver_multi,
)
from .streams import BRIDGE, MAIN, NormalStream, path_generator


class TestStreams:
    def test_same_key_same_draws(self):
        """Test that a (seed, path) key always reproduces its normals."""
        a = path_generator(42, 7).standard_normal(5)
        b = path_generator(42, 7).standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_substreams_differ(self):
        """Test that the bridge substream is independent of the main one."""
        a = path_generator(42, 7, MAIN).standard_normal(5)
        b = path_generator(42, 7, BRIDGE).standard_normal(5)
        assert not np.allclose(a, b)

    def test_chunks_match_single_draw(self):
        """Test that drawing in chunks continues each path's stream."""
        chunked = np.vstack([normals for _, normals in NormalStream(3, [0, 1]).chunks(10, chunk=4)])
        single = NormalStream(3, [0, 1]).draw(10)
        np.testing.assert_array_equal(chunked, single)

    @pytest.mark.parametrize('seed, path_index', [(-1, 0), (2 ** 64, 0), (0, -3)])
    def test_key_range(self, seed, path_index):
        """Test that keys outside 64 bits are refused."""
        with pytest.raises(ParameterError):
            path_generator(seed, path_index)


class TestStepGuards:
    def test_step_count(self):
        """Test the number of grid steps for t_max/dt."""
        assert n_steps_for(1e-3, 1.0) == 1000
        assert n_steps_for(1e-3, 0.0) == 0

    def test_step_too_large(self):
        """Test that dt above 1e-2 raises StepTooLarge."""
        with pytest.raises(StepTooLarge):
            n_steps_for(0.02, 1.0)

    @pytest.mark.parametrize('dt, t_max', [(0.0, 1.0), (-1e-3, 1.0), (1e-3, 5e-4), (1e-3, -1.0)])
    def test_invalid_grid(self, dt, t_max):
        """Test nonpositive dt and a horizon shorter than one step."""
        with pytest.raises(ParameterError):
            n_steps_for(dt, t_max)

    def test_bessel_step_stays_positive(self):
        """Test the implicit gap step for gaps at, near and far from 0."""
        d = np.array([0.0, 1e-12, 0.5, 2.0])
        out = bessel_gap_step(d, np.array([0.3, -0.3, 0.6, 0.0]), 0.25, 1e-3)
        assert np.all(out > 0)
        # residual of D' = d - dB + c dt / D'
        np.testing.assert_allclose(out, d - np.array([0.3, -0.3, 0.6, 0.0]) + 0.25e-3 / out, rtol=1e-10)


class TestOnePointDriver:
    def test_zero_horizon(self, worked_params):
        """Test that t_max=0 gives the single row W=0, V=x_r."""
        path = simulate_driver(worked_params.with_point(1.0, 0.25), 1e-3, 0.0, seed=1)
        assert path.n_steps == 0
        assert path.w[0] == 0.0
        assert path.v[0] == 0.25

    def test_path_invariants(self, worked_params):
        """Test w[0]=0, v[0]=x_r and a nonnegative gap."""
        path = simulate_driver(worked_params, 1e-3, 1.0, seed=4)
        assert path.w[0] == 0.0
        assert path.v[0] == 0.0
        assert np.all(path.gap >= 0)
        assert len(path.w) == 1001

    def test_zero_rho_is_brownian(self):
        """Test that rho=0 reproduces the cumulative sum of the main stream."""
        params = SleParams(kappa=8.0 / 3.0, rho=0.0)
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', NonHittingRegimeWarning)
            path = simulate_driver(params, 1e-3, 0.5, seed=9, path_index=2)
        expected = np.concatenate([[0.0], np.cumsum(path_generator(9, 2).standard_normal(500) * math.sqrt(1e-3))])
        np.testing.assert_allclose(path.w, expected, atol=1e-9)

    def test_zero_rho_variance(self):
        """Test Var(W_1) = 1 when rho=0."""
        params = SleParams(kappa=2.0, rho=0.0)
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', NonHittingRegimeWarning)
            w, _ = simulate_driver_batch(params, 1e-2, 1.0, seed=5, path_indices=range(4000))
        var = w[-1].var(ddof=1)
        assert abs(var - 1.0) < 3 * math.sqrt(2.0 / 4000) + 0.01

    def test_non_hitting_warning(self):
        """Test the warning for rho >= kappa/2 - 2."""
        with pytest.warns(NonHittingRegimeWarning):
            simulate_driver(SleParams(kappa=2.0, rho=0.0), 1e-3, 0.01, seed=0)

    def test_bessel_mean(self, worked_params):
        """Test E[V_1 - W_1] against the mean of a Bessel process started at 0."""
        dim = worked_params.bessel_dimension
        assert dim == pytest.approx(1.5)
        w, v = simulate_driver_batch(worked_params, 1e-3, 1.0, seed=12, path_indices=range(2000))
        gap = v[-1] - w[-1]
        expected = math.sqrt(2) * math.exp(special.gammaln((dim + 1) / 2) - special.gammaln(dim / 2))
        se = gap.std(ddof=1) / math.sqrt(len(gap))
        assert abs(gap.mean() - expected) < 4 * se + 0.01

    def test_scaling_law(self, worked_params):
        """Test that W_4 / 2 and W_1 have the same law for x_r = 0."""
        w, _ = simulate_driver_batch(worked_params, 1e-2, 4.0, seed=13, path_indices=range(2000))
        statistic = stats.ks_2samp(w[100], w[400] / 2).statistic
        assert statistic < 0.08

    def test_block_split_does_not_change_paths(self, worked_params):
        """Test that a path is identical whichever block computes it."""
        w_all, v_all = simulate_driver_batch(worked_params, 1e-3, 0.2, seed=21, path_indices=range(6))
        w_one, v_one = simulate_driver_batch(worked_params, 1e-3, 0.2, seed=21, path_indices=[3])
        np.testing.assert_array_equal(w_all[:, 3], w_one[:, 0])
        np.testing.assert_array_equal(v_all[:, 3], v_one[:, 0])

    def test_csv_rows(self, worked_params):
        """Test the t,w,v layout."""
        path = simulate_driver(worked_params, 1e-3, 0.01, seed=1)
        assert path.csv_header == ['t', 'w', 'v']
        rows = path.csv_rows()
        assert rows.shape == (11, 3)
        assert rows[-1, 0] == pytest.approx(0.01)


class TestMultiForceConfig:
    def test_collision(self):
        """Test that coinciding force points raise ForcePointCollision."""
        with pytest.raises(ForcePointCollision):
            MultiForceConfig(x_right=(0.5, 0.5), rho_right=(1.0, 1.0))

    @pytest.mark.parametrize('kwargs', [
        {'x_right': (0.6, 0.2), 'rho_right': (1.0, 1.0)},
        {'x_left': (0.5,), 'rho_left': (1.0,)},
        {'x_right': (0.5,), 'rho_right': ()},
    ])
    def test_ordering(self, kwargs):
        """Test side, ordering and weight-count checks."""
        with pytest.raises(ParameterError):
            MultiForceConfig(**kwargs)

    def test_cumulative_weights(self):
        """Test rho_bar on the right."""
        cfg = MultiForceConfig(x_right=(0.2, 0.6), rho_right=(-1.5, -1.0))
        assert cfg.cumulative_right(0) == -1.5
        assert cfg.cumulative_right(1) == -2.5


class TestMultiPointDriver:
    def test_empty_config_is_brownian(self):
        """Test that no force points gives plain Brownian motion, bit for bit on rerun."""
        first = simulate_driver_multi(2.0, MultiForceConfig(), 1e-3, 0.5, seed=9, path_index=2)
        second = simulate_driver_multi(2.0, MultiForceConfig(), 1e-3, 0.5, seed=9, path_index=2)
        np.testing.assert_array_equal(first.w, second.w)
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', NonHittingRegimeWarning)
            single = simulate_driver(SleParams(kappa=2.0, rho=0.0), 1e-3, 0.5, seed=9, path_index=2)
        np.testing.assert_allclose(first.w, single.w, atol=1e-9)
        assert first.continuation_hit is None

    def test_single_point_agrees_with_one_point_driver(self):
        """Test W_1 of the two implementations on shared noise."""
        params = SleParams(kappa=2.0, rho=1.0, x=1.0, x_r=0.5)
        cfg = MultiForceConfig.single(0.5, 1.0)
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', NonHittingRegimeWarning)
            w_single, _ = simulate_driver_batch(params, 1e-3, 1.0, seed=31, path_indices=range(300))
        w_multi = np.array([
            simulate_driver_multi(2.0, cfg, 1e-3, 1.0, seed=31, path_index=i).w[-1] for i in range(300)
        ])
        assert stats.ks_2samp(w_single[-1], w_multi).statistic < 0.1

    def test_right_points_stay_ordered(self):
        """Test W <= V_1 <= V_2 at every step before the threshold."""
        cfg = MultiForceConfig(x_right=(0.2, 0.6), rho_right=(0.5, 0.5))
        path = simulate_driver_multi(2.0, cfg, 1e-3, 0.5, seed=2)
        assert path.v_right.shape == (len(path.w), 2)
        assert np.all(path.v_right[:, 0] >= path.w)
        assert np.all(np.diff(path.v_right, axis=1) >= 0)
        assert path.csv_header == ['t', 'w', 'v', 'v_r2']

    def test_continuation_threshold(self):
        """Test that swallowing weights summing to -2.5 stops the path."""
        cfg = MultiForceConfig(x_right=(0.2, 0.6), rho_right=(-1.5, -1.0))
        paths = [simulate_driver_multi(2.0, cfg, 1e-3, 2.0, seed=7, path_index=i) for i in range(10)]
        hits = [p for p in paths if p.continuation_hit is not None]
        assert hits
        for p in hits:
            assert p.n_steps == p.continuation_hit
        for p in paths:
            if p.continuation_hit is None:
                assert p.n_steps == 2000

    def test_single_attracting_point_never_stops(self):
        """Test that a lone weight of -1.5 stays above the threshold."""
        cfg = MultiForceConfig.single(0.2, -1.5)
        path = simulate_driver_multi(2.0, cfg, 1e-3, 1.0, seed=7)
        assert path.continuation_hit is None
        assert path.n_steps == 1000

    @pytest.mark.parametrize('gap_scale, steps', [(0.9, [0.5, 0.5]), (1.1, [1.0])])
    def test_halving_trigger(self, monkeypatch, gap_scale, steps):
        """Test that a step is halved exactly when a force point lies within sqrt(dt) of W."""
        dt = 1e-3
        calls = []
        monkeypatch.setattr(_MultiPointState, 'euler', lambda state, h, dB: calls.append(h))
        state = _MultiPointState(1.0, MultiForceConfig.single(gap_scale * math.sqrt(dt), 0.5), gap_floor=1e-12)
        _advance(state, dt, 0.0, 0, path_generator(0, 0, BRIDGE))
        assert calls == pytest.approx([s * dt for s in steps])

    def test_invalid_kappa(self):
        """Test kappa > 0."""
        with pytest.raises(ParameterError):
            simulate_driver_multi(0.0, MultiForceConfig(), 1e-3, 0.1, seed=0)


class TestDriverPath:
    def test_derived_series(self):
        """Test times, gap and midpoints of a hand-built path."""
        path = DriverPath(dt=0.5, w=np.array([0.0, 1.0, 0.0]), v=np.array([0.0, 2.0, 2.0]), a=1.0)
        np.testing.assert_allclose(path.times, [0.0, 0.5, 1.0])
        np.testing.assert_allclose(path.gap, [0.0, 1.0, 2.0])
        np.testing.assert_allclose(path.w_mid, [0.5, 0.5])
        assert path.t_max == 1.0

    def test_frozen_step_values(self):
        """Test that one-point drivers freeze on V and multi-point drivers on midpoints."""
        w = np.array([0.0, 1.0, 0.0])
        path = DriverPath(dt=0.5, w=w, v=np.array([0.0, 2.0, 2.0]), a=1.0)
        # dV = 2 exceeds sqrt(2 a dt) = 1, then V stalls
        np.testing.assert_allclose(path.w_step, [1.0, 0.5])
        multi = DriverPath(dt=0.5, w=w, v=np.array([0.0, 2.0, 2.0]), a=1.0, v_left=np.full((3, 1), -1.0))
        np.testing.assert_allclose(multi.w_step, multi.w_mid)
        assert DriverPath(dt=0.5, w=w, v=None, a=1.0).w_step.tolist() == [0.5, 0.5]

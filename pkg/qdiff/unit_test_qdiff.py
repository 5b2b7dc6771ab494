import math

import numpy as np
import pytest
from scipy import special, stats

from radial.tilted import simulate_tilted_batch
from spectrum.dimension import one_point_prefactor
from spectrum.exceptions import GammaPole, ParameterError
from spectrum.params import SleParams, spectrum_params

from .exceptions import ParameterOutOfRange, TruncationWarning
from .jacobi import (
    QDiffusionSpec, convergence_rate, density_table, eigenvalue, exact_moment_inv_mu, invariant_density,
    mean_transition, moment, q_diffusion_spec, sample_stationary, stationary_cdf, stationary_moment_inv_mu,
    tail_constant, transition_density,
)


@pytest.fixture
def worked_q(worked_params, worked_spectrum):
    """delta_+ = 5, delta_- = 1: Beta(2.5, 0.5) invariant law."""
    return q_diffusion_spec(worked_params, worked_spectrum.mu)


def beta_quad(spec, f, power=0.0, n_nodes=128):
    """Integral of f over (0, 1) on Gauss-Jacobi nodes matched to y^(alpha_J + power) (1 - y)^beta_J."""
    al, be = spec.jacobi_alpha + power, spec.jacobi_beta
    v, w = special.roots_jacobi(n_nodes, al, be)
    y = (1 - v) / 2
    smooth = np.asarray(f(y)) / (y ** al * (1 - y) ** be)
    return float(2 ** (-al - be - 1) * np.dot(w, smooth))


class TestQDiffusionSpec:
    def test_worked_example(self, worked_q):
        """Test delta_+, delta_-, the Jacobi parameters and c~ for kappa=2, rho=-1.5, zeta=0."""
        assert worked_q.delta_plus == pytest.approx(5.0)
        assert worked_q.delta_minus == pytest.approx(1.0)
        assert worked_q.jacobi_alpha == pytest.approx(1.5)
        assert worked_q.jacobi_beta == pytest.approx(-0.5)
        assert worked_q.c_tilde == pytest.approx(0.848826, abs=1e-6)

    def test_rate_identity(self, worked_params, worked_spectrum, worked_q):
        """Test (delta_+ + delta_-)/4 = 1 - a + mu."""
        assert worked_q.rate == pytest.approx(1 - worked_params.a + worked_spectrum.mu, abs=1e-14)

    def test_c_tilde_gamma_form(self, hitting_params):
        """Test c~ = G(2-2a+2mu) / (G(2a+a rho) G(2-4a-a rho+2mu))."""
        sp = spectrum_params(hitting_params, 0.3)
        spec = q_diffusion_spec(hitting_params, sp.mu)
        a, rho, mu = hitting_params.a, hitting_params.rho, sp.mu
        expected = math.gamma(2 - 2 * a + 2 * mu) / (math.gamma(2 * a + a * rho) * math.gamma(2 - 4 * a - a * rho + 2 * mu))
        assert spec.c_tilde == pytest.approx(expected, rel=1e-12)

    def test_nonpositive_delta(self):
        """Test that delta_+ <= 0 raises ParameterOutOfRange."""
        with pytest.raises(ParameterOutOfRange):
            q_diffusion_spec(SleParams(kappa=1.0, rho=0.0), 0.0)
        with pytest.raises(ParameterError):
            QDiffusionSpec(a=1.0, mu=0.0, rho=0.0, delta_plus=1.0, delta_minus=0.0)


class TestInvariantDensity:
    def test_value(self, worked_q):
        """Test c~ x^1.5 (1-x)^-0.5 at x = 0.3."""
        assert invariant_density(worked_q, 0.3) == pytest.approx(0.848826 * 0.3 ** 1.5 / math.sqrt(0.7), rel=1e-6)

    def test_normalized(self, worked_q):
        """Test that the density integrates to 1."""
        assert beta_quad(worked_q, lambda x: invariant_density(worked_q, x)) == pytest.approx(1.0, abs=1e-10)

    def test_mean_is_drift_zero(self, worked_params, worked_spectrum, worked_q):
        """Test that the Beta mean 2.5/3 is the zero of the weighted drift."""
        mu, a, rho = worked_spectrum.mu, worked_params.a, worked_params.rho
        assert moment(worked_q, 1) == pytest.approx(2.5 / 3, rel=1e-12)
        assert worked_q.q_star == pytest.approx((1 - 2 * a - a * rho / 2 + mu) / (1 - a + mu))

    def test_outside_unit_interval(self, worked_q):
        """Test that x outside (0, 1) is refused."""
        with pytest.raises(ParameterError):
            invariant_density(worked_q, 1.0)


class TestStationaryMoments:
    def test_inverse_mu_moment(self, worked_params, worked_spectrum, worked_q):
        """Test E*[X^-mu] ~ 1.697653 and its agreement with the one-point prefactor."""
        value = stationary_moment_inv_mu(worked_q)
        assert value == pytest.approx(1.697653, abs=1e-6)
        assert value == pytest.approx(one_point_prefactor(worked_params, worked_spectrum), rel=1e-12)

    def test_inverse_mu_moment_by_quadrature(self, worked_q):
        """Test the Gamma expression against direct integration of x^-mu p(x)."""
        value = beta_quad(worked_q, lambda x: x ** -worked_q.mu * invariant_density(worked_q, x), power=-worked_q.mu)
        assert value == pytest.approx(stationary_moment_inv_mu(worked_q), abs=1e-9)

    def test_zero_order(self, worked_q):
        """Test E[X^0] = 1."""
        assert moment(worked_q, 0.0) == pytest.approx(1.0, abs=1e-15)

    def test_divergent_order(self, worked_q):
        """Test that p <= -delta_+/2 raises GammaPole."""
        with pytest.raises(GammaPole):
            moment(worked_q, -2.5)

    @pytest.mark.parametrize('y', [0.01, 0.1])
    def test_tail_bound(self, worked_q, y):
        """Test P*(X <= y) <= C y^(delta_+/2) with the Beta CDF constant."""
        alpha, beta = worked_q.beta_shape
        bound = worked_q.c_tilde / alpha * max(1.0, (1 - y) ** (beta - 1))
        assert tail_constant(worked_q, y) <= bound
        assert stationary_cdf(worked_q, y) == pytest.approx(tail_constant(worked_q, y) * y ** alpha)


class TestEigenvalues:
    def test_values(self, worked_params, worked_spectrum, worked_q):
        """Test lambda_0 = 0, lambda_1 = -1.5 and the gap identity."""
        assert eigenvalue(worked_q, 0) == 0
        assert eigenvalue(worked_q, 1) == pytest.approx(-1.5)
        assert -eigenvalue(worked_q, 1) == pytest.approx(1 - worked_params.a + worked_spectrum.mu)

    def test_negative_index(self, worked_q):
        """Test n >= 0."""
        with pytest.raises(ParameterError):
            eigenvalue(worked_q, -1)


class TestTransitionDensity:
    def test_long_time_limit(self, worked_q):
        """Test that only the stationary term survives at t = 50."""
        y = np.linspace(0.05, 0.95, 19)
        for x0 in (0.2, 0.7):
            np.testing.assert_allclose(
                transition_density(worked_q, 50.0, x0, y), invariant_density(worked_q, y), rtol=0, atol=1e-10,
            )

    @pytest.mark.parametrize('t', [0.1, 1.0])
    def test_normalized(self, worked_q, t):
        """Test that p(t, x0, .) integrates to 1."""
        total = beta_quad(worked_q, lambda y: transition_density(worked_q, t, 0.4, y, n_terms=64))
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_chapman_kolmogorov(self, worked_q):
        """Test the semigroup property at s = t = 0.25."""
        x0, y = 0.4, 0.6
        composed = beta_quad(worked_q, lambda z: transition_density(worked_q, 0.25, x0, z) * np.array([
            transition_density(worked_q, 0.25, zi, y) for zi in z
        ]))
        assert composed == pytest.approx(transition_density(worked_q, 0.5, x0, y), rel=1e-6)

    def test_detailed_balance(self, worked_q):
        """Test p_stat(x) p(t,x,y) = p_stat(y) p(t,y,x) on a 5x5 grid."""
        grid = [0.1, 0.3, 0.5, 0.7, 0.9]
        for x in grid:
            for y in grid:
                left = invariant_density(worked_q, x) * transition_density(worked_q, 0.3, x, y)
                right = invariant_density(worked_q, y) * transition_density(worked_q, 0.3, y, x)
                assert left == pytest.approx(right, rel=1e-8)

    def test_short_time_warning(self, worked_q):
        """Test TruncationWarning below t = 0.05."""
        with pytest.warns(TruncationWarning):
            transition_density(worked_q, 0.01, 0.4, 0.5)

    def test_too_few_terms_warn(self, worked_q):
        """Test TruncationWarning when the last kept term is still large."""
        with pytest.warns(TruncationWarning):
            transition_density(worked_q, 0.1, 0.4, 0.5, n_terms=3)

    @pytest.mark.parametrize('kwargs', [{'t': 0.0}, {'x0': 0.0}, {'n_terms': 0}])
    def test_invalid_arguments(self, worked_q, kwargs):
        """Test t > 0, x0 in (0, 1) and n_terms >= 1."""
        args = {'t': 1.0, 'x0': 0.5, 'y': 0.5, **kwargs}
        with pytest.raises(ParameterError):
            transition_density(worked_q, **args)

    def test_mean_matches_density(self, worked_q):
        """Test the closed-form conditional mean against the first moment of the density."""
        mean = beta_quad(worked_q, lambda y: y * transition_density(worked_q, 0.5, 0.3, y))
        assert mean == pytest.approx(mean_transition(worked_q, 0.5, 0.3), abs=1e-8)

    def test_density_table(self, worked_q):
        """Test the y,p midpoint table at t = 50."""
        table = density_table(worked_q, 50.0, 0.5, 10)
        assert table.shape == (10, 2)
        np.testing.assert_allclose(table[:, 0], np.arange(0.05, 1.0, 0.1))
        np.testing.assert_allclose(table[:, 1], invariant_density(worked_q, table[:, 0]), atol=1e-10)


class TestConvergence:
    def test_rate(self, worked_q):
        """Test that the fitted relaxation rate is within 5% of 1 - a + mu."""
        rate = convergence_rate(worked_q, 0.3, np.linspace(1.5, 4.0, 11))
        assert rate == pytest.approx(worked_q.rate, rel=0.05)

    def test_exact_moment_limits(self, worked_q):
        """Test E*[Q_t^-mu | x0] against quadrature at t = 1 and the stationary value at t = 50."""
        by_quad = beta_quad(worked_q, lambda y: y ** -worked_q.mu * transition_density(worked_q, 1.0, 0.3, y), power=-worked_q.mu)
        assert exact_moment_inv_mu(worked_q, 1.0, 0.3) == pytest.approx(by_quad, rel=1e-7)
        assert exact_moment_inv_mu(worked_q, 50.0, 0.3) == pytest.approx(stationary_moment_inv_mu(worked_q), rel=1e-10)

    def test_monte_carlo_mean(self, worked_spectrum):
        """Test the tilted SDE's mean at s = 1 against the exact conditional mean."""
        params = SleParams(kappa=2.0, rho=-1.5, x=1.0, x_r=0.5)
        spec = q_diffusion_spec(params, worked_spectrum.mu)
        q, _ = simulate_tilted_batch(params, worked_spectrum, 1e-3, 1.0, seed=17, path_indices=range(500), record_s=[1.0])
        se = q[0].std(ddof=1) / math.sqrt(q.shape[1])
        assert abs(q[0].mean() - mean_transition(spec, 1.0, params.q0)) < 4 * se + 0.02


class TestStationarySampling:
    def test_moments_and_law(self, worked_q):
        """Test sample mean and a KS distance against Beta(2.5, 0.5)."""
        draws = sample_stationary(worked_q, 100_000, seed=3)
        assert np.all((draws > 0) & (draws < 1))
        se = draws.std(ddof=1) / math.sqrt(len(draws))
        assert abs(draws.mean() - 2.5 / 3) < 4 * se
        assert stats.kstest(draws, stats.beta(*worked_q.beta_shape).cdf).statistic < 0.01

    def test_seed_reuse(self, worked_q):
        """Test that the same seed gives the same sequence."""
        np.testing.assert_array_equal(sample_stationary(worked_q, 10, seed=8), sample_stationary(worked_q, 10, seed=8))

    def test_count(self, worked_q):
        """Test n >= 1."""
        with pytest.raises(ParameterError):
            sample_stationary(worked_q, 0, seed=1)

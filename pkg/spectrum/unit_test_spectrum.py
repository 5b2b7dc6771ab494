import math
import warnings

import numpy as np
import pytest
from scipy import integrate, special

from .dimension import (
    beta_zero, beta_zero_star, covering_exponent, d_beta, d_star, dim_spectrum,
    one_point_prefactor, spectrum_bounds, spectrum_table,
)
from .exceptions import GammaPole, MuCNonpositiveWarning, NoPositiveRegion, ParameterError, Unclassified, ZetaOutOfRange
from .params import (
    PhaseClass, SleParams, boundary_phase, spectrum_params, spectrum_params_from_beta,
    spectrum_params_from_mu, zeta_lower_bound,
)
from .serializers import SleParamsSerializer


def random_grid(n=100, seed=7):
    """Random (kappa, rho, beta) with kappa in (0,4], rho in (-2, kappa/2-2), beta in [beta_-, beta_+]."""
    rng = np.random.default_rng(seed)
    rows = []
    while len(rows) < n:
        kappa = rng.uniform(0.2, 4.0)
        rho = rng.uniform(-2.0, kappa / 2 - 2)
        if rho <= -1.99 or rho >= kappa / 2 - 2.01:
            continue
        params = SleParams(kappa, rho)
        try:
            lo, hi = spectrum_bounds(params)
        except NoPositiveRegion:
            continue
        rows.append((params, rng.uniform(lo, hi)))
    return rows


class TestSleParams:
    def test_derived_quantities(self, worked_params):
        """Test a, mu_c, q0 and the Bessel dimension of the worked example."""
        assert worked_params.a == 1.0
        assert worked_params.mu_c == pytest.approx(0.75)
        assert worked_params.q0 == 1.0
        assert worked_params.bessel_dimension == pytest.approx(1.5)
        assert worked_params.hits_boundary

    def test_a_is_exactly_two_over_kappa(self):
        """Test that a is computed as 2/kappa without rounding drift."""
        params = SleParams(kappa=3.0, rho=0.0)
        assert params.a == 2.0 / 3.0

    @pytest.mark.parametrize('kwargs', [
        {'kappa': 0.0, 'rho': 0.0},
        {'kappa': 2.0, 'rho': -2.0},
        {'kappa': 2.0, 'rho': 0.0, 'x': 1.0, 'x_r': 1.0},
        {'kappa': 2.0, 'rho': 0.0, 'x': 1.0, 'x_r': -0.5},
    ])
    def test_invalid_parameters(self, kwargs):
        """Test that every broken invariant raises ParameterError."""
        with pytest.raises(ParameterError):
            SleParams(**kwargs)


class TestSpectrumParams:
    def test_worked_example(self, worked_params):
        """Test kappa=2, rho=-1.5, zeta=0 gives mu_c=0.75, mu=1.5, beta=4/3."""
        sp = spectrum_params(worked_params, 0.0)
        assert sp.mu_c == pytest.approx(0.75)
        assert sp.mu == pytest.approx(1.5)
        assert sp.beta == pytest.approx(4 / 3)

    def test_zeta_zero_doubles_mu_c(self, hitting_params):
        """Test that zeta=0 gives mu = 2 mu_c and beta = a/mu_c when mu_c > 0."""
        sp = spectrum_params(hitting_params, 0.0)
        assert sp.mu == pytest.approx(2 * hitting_params.mu_c)
        assert sp.beta == pytest.approx(hitting_params.a / hitting_params.mu_c)

    def test_inverse_maps(self, worked_params):
        """Test that beta=4/3 maps back to zeta=0 and that the mu map agrees."""
        from_beta = spectrum_params_from_beta(worked_params, 4 / 3)
        assert from_beta.zeta == pytest.approx(0.0, abs=1e-14)
        assert from_beta.mu == pytest.approx(1.5)
        sp = spectrum_params(worked_params, 0.3)
        from_mu = spectrum_params_from_mu(worked_params, sp.mu)
        assert from_mu.zeta == pytest.approx(0.3, abs=1e-12)
        assert from_mu.beta == pytest.approx(sp.beta, rel=1e-12)

    def test_roundtrip_on_random_grid(self):
        """Test zeta -> (mu, beta) -> zeta to 1e-12 on random parameters."""
        rng = np.random.default_rng(3)
        for params, _ in random_grid(50):
            zeta = zeta_lower_bound(params) + rng.uniform(0.01, 3.0)
            sp = spectrum_params(params, zeta)
            assert sp.mu > sp.mu_c
            assert sp.beta > 0
            assert abs(sp.roundtrip_zeta(params.a) - zeta) < 1e-12

    def test_zeta_out_of_range(self, worked_params):
        """Test that zeta at the lower bound is rejected."""
        with pytest.raises(ZetaOutOfRange):
            spectrum_params(worked_params, zeta_lower_bound(worked_params))

    def test_nonpositive_mu_c_warns(self):
        """Test the MuCNonpositive flag for strongly negative rho with small a."""
        params = SleParams(kappa=8.0, rho=-1.9)
        assert params.mu_c <= 0
        with pytest.warns(MuCNonpositiveWarning):
            sp = spectrum_params(params, 0.5)
        assert sp.beta > 0


class TestDimensionSpectrum:
    def test_worked_values(self, worked_params):
        """Test beta_0=1/3, d(beta_0)=0.625 and d*(4/3)=0.625."""
        assert beta_zero(worked_params) == pytest.approx(1 / 3)
        assert d_beta(worked_params, 1 / 3) == pytest.approx(0.625)
        assert d_star(worked_params, 4 / 3) == pytest.approx(0.625)
        assert beta_zero_star(worked_params) == pytest.approx(4 / 3)
        assert beta_zero_star(worked_params) == pytest.approx(beta_zero(worked_params) / (1 - 1.5 / 2))

    def test_hitting_example_peak(self, hitting_params):
        """Test d(beta_0) = 0.5 for kappa=3, rho=-1."""
        assert d_beta(hitting_params, beta_zero(hitting_params)) == pytest.approx(0.5)

    def test_identities_on_random_grid(self):
        """Test d(beta) = d*(beta/(1+rho/2)) and the closed form of d(beta_0)."""
        for params, beta in random_grid():
            kappa, rho = params.kappa, params.rho
            assert abs(d_beta(params, beta) - d_star(params, beta / (1 + rho / 2))) < 1e-12
            peak = 1 - (rho + 2) * (rho + 4 - kappa / 2) / kappa
            assert abs(d_beta(params, beta_zero(params)) - peak) < 1e-12

    def test_bounds_are_zeros(self, worked_params):
        """Test that beta_- and beta_+ are zeros of d bracketing beta_0."""
        result = dim_spectrum(worked_params, 1.0)
        assert result.beta_minus < result.beta_zero < result.beta_plus
        assert abs(d_beta(worked_params, result.beta_minus)) < 1e-9
        assert abs(d_beta(worked_params, result.beta_plus)) < 1e-9

    def test_unimodal(self):
        """Test d increases up to beta_0* (1+rho/2) and decreases after."""
        for params, _ in random_grid(20, seed=11):
            lo, hi = spectrum_bounds(params)
            peak = beta_zero_star(params) * (1 + params.rho / 2)
            left = np.linspace(lo, peak, 50)
            right = np.linspace(peak, min(hi, 20 * peak), 50)
            assert np.all(np.diff([d_beta(params, b) for b in left]) > -1e-12)
            assert np.all(np.diff([d_beta(params, b) for b in right]) < 1e-12)

    def test_covering_exponent_matches_weighted_spectrum(self, hitting_params):
        """Test 1 + (zeta beta - mu)(1 + rho/2) = d*(beta)."""
        for zeta in (0.0, 0.2, 0.7):
            sp = spectrum_params(hitting_params, zeta)
            assert covering_exponent(hitting_params, sp) == pytest.approx(d_star(hitting_params, sp.beta), abs=1e-12)

    def test_no_positive_region(self):
        """Test NoPositiveRegion when beta_0 or d(beta_0) is not positive."""
        with pytest.raises(NoPositiveRegion):
            spectrum_bounds(SleParams(kappa=9.0, rho=0.4))
        with pytest.raises(NoPositiveRegion):
            spectrum_bounds(SleParams(kappa=1.0, rho=-1.0))

    def test_table_spans_positive_region(self, worked_params):
        """Test the tabulated grid starts and ends at zeros of d."""
        rows = spectrum_table(worked_params, 11)
        assert len(rows) == 11
        assert rows[0][1] == pytest.approx(0.0, abs=1e-9)
        assert rows[-1][1] == pytest.approx(0.0, abs=1e-9)
        assert max(r[1] for r in rows) <= 0.625 + 1e-12


class TestOnePointPrefactor:
    def test_worked_value(self, worked_params, worked_spectrum):
        """Test K = G(3)G(1)/(G(1.5)G(2.5)) ~ 1.697653."""
        K = one_point_prefactor(worked_params, worked_spectrum)
        assert K == pytest.approx(1.697653, abs=1e-6)
        assert K == pytest.approx(2.0 / (special.gamma(1.5) * special.gamma(2.5)), rel=1e-13)

    def test_matches_beta_quadrature(self, worked_params, worked_spectrum):
        """Test K against the Beta(2.5, 0.5) integral of x^(-mu)."""
        mu = worked_spectrum.mu
        alpha, beta = 2.5, 0.5
        norm = math.exp(-special.betaln(alpha, beta))
        value, _ = integrate.quad(
            lambda x: norm * x ** (alpha - 1 - mu), 0.0, 1.0,
            weight='alg', wvar=(0.0, beta - 1), epsabs=1e-13, epsrel=1e-13,
        )
        assert one_point_prefactor(worked_params, worked_spectrum) == pytest.approx(value, abs=1e-10)

    def test_gamma_pole(self, worked_params):
        """Test GammaPole once an argument leaves the positive reals."""
        params = SleParams(kappa=0.5, rho=-1.5)
        sp = spectrum_params_from_mu(params, 5.0)
        with pytest.raises(GammaPole):
            one_point_prefactor(params, sp)

    def test_near_lower_zeta_stays_finite(self, worked_params):
        """Test K stays finite as zeta approaches its lower bound."""
        sp = spectrum_params(worked_params, zeta_lower_bound(worked_params) + 1e-10)
        assert math.isfinite(one_point_prefactor(worked_params, sp))


class TestBoundaryPhase:
    @pytest.mark.parametrize('kappa,rho_bar,expected', [
        (3.0, 0.0, PhaseClass.NO_HIT),
        (6.0, 0.0, PhaseClass.HIT_BOUNCE_EMPTY_INTERIOR),
        (2.0, -2.5, PhaseClass.HIT_CANNOT_CONTINUE),
        (6.0, -1.5, PhaseClass.HIT_INTERVAL_CONTINUE),
    ])
    def test_regimes(self, kappa, rho_bar, expected):
        """Test one representative of each regime."""
        assert boundary_phase(kappa, rho_bar) is expected

    def test_below_every_regime(self):
        """Test Unclassified below (-2) and (kappa/2-4)."""
        with pytest.raises(Unclassified):
            boundary_phase(2.0, -3.5)
        with pytest.raises(Unclassified):
            boundary_phase(6.0, -2.5)

    def test_partition_grid(self):
        """Test every classified grid point gets exactly one regime."""
        counts = {phase: 0 for phase in PhaseClass}
        for kappa in np.linspace(0.1, 8.0, 100):
            for rho_bar in np.linspace(-6.0, 4.0, 100):
                lowest = min(-2.0, kappa / 2 - 4)
                if rho_bar <= lowest:
                    with pytest.raises(Unclassified):
                        boundary_phase(kappa, rho_bar)
                    continue
                counts[boundary_phase(kappa, rho_bar)] += 1
        assert all(count > 0 for count in counts.values())


class TestSleParamsSerializer:
    def test_valid_payload(self):
        """Test the serializer builds SleParams with defaults filled in."""
        serializer = SleParamsSerializer(data={'kappa': 2, 'rho': -1.5})
        assert serializer.is_valid(), serializer.errors
        params = serializer.save()
        assert params == SleParams(2.0, -1.5, 1.0, 0.0)

    def test_errors_keyed_by_field(self):
        """Test field-keyed validation errors."""
        serializer = SleParamsSerializer(data={'kappa': -1, 'rho': -3})
        assert not serializer.is_valid()
        assert 'kappa' in serializer.errors
        assert 'rho' in serializer.errors

    def test_cross_field_error(self):
        """Test x <= x_r is reported against x."""
        serializer = SleParamsSerializer(data={'kappa': 2, 'x': 0.5, 'x_r': 0.5})
        assert not serializer.is_valid()
        assert 'x' in serializer.errors

"""
Spectral data of the weighted ratio diffusion

    dQ = [(1 - 2a - a rho/2 + mu) - (1 - a + mu) Q] ds + sqrt(Q (1 - Q)) dB.

With Y = 1 - 2Q the generator is half the Jacobi operator with parameters
(delta_+/2 - 1, delta_-/2 - 1), so the transition density expands in Jacobi
polynomials and the invariant law of Q is Beta(delta_+/2, delta_-/2).
"""
import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from drivers.streams import STATIONARY, path_generator
from spectrum.conf import lab_settings
from spectrum.exceptions import GammaPole, ParameterError

from .exceptions import ParameterOutOfRange, TruncationWarning

logger = logging.getLogger(__name__)

SHORT_TIME = 0.05
RATE_GRID = 199


@dataclass(frozen=True)
class QDiffusionSpec:
    a: float
    mu: float
    rho: float
    delta_plus: float
    delta_minus: float

    def __post_init__(self):
        if not (self.delta_plus > 0 and self.delta_minus > 0):
            raise ParameterOutOfRange(
                f"delta_+={self.delta_plus:g} and delta_-={self.delta_minus:g} must both be positive"
            )

    @property
    def jacobi_alpha(self):
        return self.delta_plus / 2 - 1

    @property
    def jacobi_beta(self):
        return self.delta_minus / 2 - 1

    @property
    def beta_shape(self):
        """(alpha, beta) of the Beta invariant law in Q coordinates."""
        return self.delta_plus / 2, self.delta_minus / 2

    @property
    def c_tilde(self):
        return math.exp(-special.betaln(*self.beta_shape))

    @property
    def rate(self):
        """Spectral gap 1 - a + mu = (delta_+ + delta_-)/4."""
        return (self.delta_plus + self.delta_minus) / 4

    @property
    def q_star(self):
        alpha, beta = self.beta_shape
        return alpha / (alpha + beta)


def q_diffusion_spec(params, mu):
    a, rho = params.a, params.rho
    return QDiffusionSpec(
        a=a, mu=mu, rho=rho,
        delta_plus=4 - 8 * a - 2 * a * rho + 4 * mu,
        delta_minus=4 * a + 2 * a * rho,
    )


def _unit_interval(x, name, closed_right=False):
    x = np.asarray(x, dtype=float)
    upper, bracket = ((x <= 1), ']') if closed_right else ((x < 1), ')')
    if np.any(~((x > 0) & upper)):
        raise ParameterError(f"{name} must lie in (0, 1{bracket}")
    return x


def _scalar(out):
    return float(out) if np.ndim(out) == 0 else out


def invariant_density(spec, x):
    """c~ x^(delta_+/2 - 1) (1 - x)^(delta_-/2 - 1)."""
    x = _unit_interval(x, 'x')
    return _scalar(spec.c_tilde * x ** spec.jacobi_alpha * (1 - x) ** spec.jacobi_beta)


def moment(spec, p):
    """E*[X^p] for X ~ Beta(delta_+/2, delta_-/2)."""
    alpha, beta = spec.beta_shape
    if not alpha + p > 0:
        raise GammaPole(f"moment of order {p} diverges: alpha + p = {alpha + p:g}")
    return math.exp(special.betaln(alpha + p, beta) - special.betaln(alpha, beta))


def stationary_moment_inv_mu(spec):
    return moment(spec, -spec.mu)


def stationary_cdf(spec, y):
    return _scalar(special.betainc(*spec.beta_shape, np.asarray(y, dtype=float)))


def tail_constant(spec, y):
    """P*(X <= y) / y^(delta_+/2)."""
    alpha, _ = spec.beta_shape
    return stationary_cdf(spec, y) / y ** alpha


def eigenvalue(spec, n):
    if n < 0:
        raise ParameterError(f"n must be nonnegative, got {n}")
    return -(n / 2) * (n + spec.jacobi_alpha + spec.jacobi_beta + 1)


def _eigenvalues(spec, n_terms):
    n = np.arange(n_terms)
    return -(n / 2) * (n + spec.jacobi_alpha + spec.jacobi_beta + 1)


def _log_norms(spec, n_terms):
    """log ||P_n||^2 against (1 - y)^alpha_J (1 + y)^beta_J on [-1, 1]."""
    al, be = spec.jacobi_alpha, spec.jacobi_beta
    n = np.arange(n_terms, dtype=float)
    out = np.empty(n_terms)
    out[0] = (al + be + 1) * math.log(2) + special.betaln(al + 1, be + 1)
    rest = n[1:]
    out[1:] = (
        (al + be + 1) * math.log(2) - np.log(2 * rest + al + be + 1)
        + special.gammaln(rest + al + 1) + special.gammaln(rest + be + 1)
        - special.gammaln(rest + al + be + 1) - special.gammaln(rest + 1)
    )
    return out


def _sup_log_bound(spec, n):
    # sup |P_n| on [-1, 1] is binom(n + q, n) for q = max(alpha_J, beta_J) >= -1/2
    q = max(spec.jacobi_alpha, spec.jacobi_beta)
    if q < -0.5:
        return 0.0
    return special.gammaln(n + q + 1) - special.gammaln(n + 1) - special.gammaln(q + 1)


def _check_truncation(spec, t, n_terms, log_norms):
    if t < SHORT_TIME:
        warnings.warn(
            f"t={t:g} is below {SHORT_TIME}; the expansion in {n_terms} terms is not reliable",
            TruncationWarning,
            stacklevel=3,
        )
        return
    last = n_terms - 1
    log_last = eigenvalue(spec, last) * t + 2 * _sup_log_bound(spec, last) - log_norms[last]
    if log_last - (-log_norms[0]) > math.log(lab_settings.TRUNCATION_TOL):
        warnings.warn(
            f"last of {n_terms} terms at t={t:g} exceeds {lab_settings.TRUNCATION_TOL:g} of the leading term",
            TruncationWarning,
            stacklevel=3,
        )
        logger.warning("jacobi expansion truncated at %d terms for t=%g", n_terms, t)


def _terms(n_terms):
    if n_terms is None:
        n_terms = lab_settings.N_TERMS
    if not 1 <= n_terms <= lab_settings.MAX_TERMS:
        raise ParameterError(f"n_terms must lie in [1, {lab_settings.MAX_TERMS}], got {n_terms}")
    return int(n_terms)


def _kernel_sum(spec, t, x0, y, n_terms):
    """sum_n e^(lambda_n t) P_n(1 - 2 x0) P_n(1 - 2 y) / ||P_n||^2."""
    if not t > 0:
        raise ParameterError(f"t must be positive, got {t}")
    log_norms = _log_norms(spec, n_terms)
    _check_truncation(spec, t, n_terms, log_norms)
    n = np.arange(n_terms)[:, None]
    al, be = spec.jacobi_alpha, spec.jacobi_beta
    p_u = special.eval_jacobi(n[:, 0], al, be, 1 - 2 * x0)
    p_v = special.eval_jacobi(n, al, be, 1 - 2 * np.atleast_1d(y)[None, :])
    coef = np.exp(_eigenvalues(spec, n_terms) * t - log_norms) * p_u
    return coef @ p_v


def transition_density(spec, t, x0, y, n_terms=None):
    """p(t, x0, y) of Q, from the Jacobi expansion of Y = 1 - 2Q."""
    n_terms = _terms(n_terms)
    x0 = float(_unit_interval(x0, 'x0', closed_right=True))
    y = _unit_interval(y, 'y')
    total = _kernel_sum(spec, t, x0, y, n_terms)
    v = 1 - 2 * np.atleast_1d(y)
    weight = (1 - v) ** spec.jacobi_alpha * (1 + v) ** spec.jacobi_beta
    out = 2 * weight * total
    return float(out[0]) if y.ndim == 0 else out.reshape(y.shape)


def mean_transition(spec, t, x0):
    """E*[Q_t | Q_0 = x0]; the drift is linear, so the mean relaxes at the spectral gap."""
    return spec.q_star + (x0 - spec.q_star) * math.exp(-spec.rate * t)


def exact_moment_inv_mu(spec, t, x0, n_terms=None):
    """E*[Q_t^(-mu) | Q_0 = x0] by Gauss-Jacobi quadrature in Y coordinates."""
    n_terms = _terms(n_terms)
    x0 = float(_unit_interval(x0, 'x0', closed_right=True))
    al, be, mu = spec.jacobi_alpha, spec.jacobi_beta, spec.mu
    if not al - mu > -1:
        raise GammaPole(f"E[Q^-mu] diverges: alpha_J - mu = {al - mu:g}")
    if not t > 0:
        raise ParameterError(f"t must be positive, got {t}")
    log_norms = _log_norms(spec, n_terms)
    _check_truncation(spec, t, n_terms, log_norms)
    nodes, weights = special.roots_jacobi(n_terms, al - mu, be)
    n = np.arange(n_terms)
    integrals = special.eval_jacobi(n[:, None], al, be, nodes[None, :]) @ weights
    coef = np.exp(_eigenvalues(spec, n_terms) * t - log_norms) * special.eval_jacobi(n, al, be, 1 - 2 * x0)
    return float(2 ** mu * coef @ integrals)


def convergence_rate(spec, x0, t_grid, n_terms=None):
    """Exponential rate of sup_y |p(t, x0, y)/p_stat(y) - 1|, fitted log-linearly over t_grid."""
    n_terms = _terms(n_terms)
    t_grid = np.asarray(t_grid, dtype=float)
    if len(t_grid) < 2:
        raise ParameterError("need at least two times to fit a rate")
    y = np.linspace(0.0, 1.0, RATE_GRID + 2)[1:-1]
    log_h0 = _log_norms(spec, 1)[0]
    distance = np.array([
        np.max(np.abs(math.exp(log_h0) * _kernel_sum(spec, t, x0, y, n_terms) - 1)) for t in t_grid
    ])
    slope, _ = np.polyfit(t_grid, np.log(distance), 1)
    logger.debug("sup distance %s over t=%s", distance, t_grid)
    return float(-slope)


def density_table(spec, t, x0, n_grid, n_terms=None):
    """Rows (y, p(t, x0, y)) at the midpoints of n_grid equal cells."""
    if n_grid < 1:
        raise ParameterError(f"n_grid must be positive, got {n_grid}")
    y = (np.arange(n_grid) + 0.5) / n_grid
    return np.column_stack([y, transition_density(spec, t, x0, y, n_terms)])


def sample_stationary(spec, n, seed):
    """n draws from Beta(delta_+/2, delta_-/2) as G_1/(G_1 + G_2) of Gamma variates."""
    if n < 1:
        raise ParameterError(f"n must be positive, got {n}")
    rng = path_generator(seed, 0, STATIONARY)
    alpha, beta = spec.beta_shape
    g1 = rng.standard_gamma(alpha, n)
    g2 = rng.standard_gamma(beta, n)
    return g1 / (g1 + g2)

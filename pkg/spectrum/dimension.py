"""
Boundary multifractal spectra d(beta) and d*(beta), their positivity range,
and the one-point prefactor K.
"""
import logging
import math
from typing import NamedTuple

import numpy as np
from scipy import optimize, special

from .exceptions import GammaPole, NoPositiveRegion, ParameterError

logger = logging.getLogger(__name__)

BISECT_XTOL = 1e-12
MAX_BRACKET_DOUBLINGS = 200


class DimensionSpectrum(NamedTuple):
    d: float
    d_star: float
    beta_minus: float
    beta_plus: float
    beta_zero: float


def d_beta(params, beta):
    """Dimension of the set of boundary points with derivative exponent beta."""
    kappa, rho = params.kappa, params.rho
    return 1 - (beta / kappa) * ((kappa - 2 * rho) / 4 - (1 + rho / 2 + 2 * beta) / beta) ** 2


def d_star(params, beta):
    """Spectrum of the radially parametrized derivative exponent."""
    a, rho = params.a, params.rho
    return 1 - (a * beta / 2) * ((1 - a * rho) / (2 * a) - (1 + 2 * beta) / beta) ** 2 * (1 + rho / 2)


def beta_zero(params):
    """Maximiser of d; d(beta_zero) = 1 - (rho+2)(rho+4-kappa/2)/kappa."""
    return (4 + 2 * params.rho) / (8 - params.kappa + 2 * params.rho)


def beta_zero_star(params):
    a = params.a
    return 2 * a / (4 * a - 1 + a * params.rho)


def covering_exponent(params, sp):
    """Growth exponent 1 + (zeta*beta - mu)(1 + rho/2) of the expected covering count."""
    return 1 + (sp.zeta * sp.beta - sp.mu) * (1 + params.rho / 2)


def spectrum_bounds(params):
    """(beta_minus, beta_plus): the ends of the interval where d is positive.

    Brackets grow geometrically from beta_zero; beta_plus is infinite when d
    stays positive as beta grows (rho = kappa/2 - 4).
    """
    b0 = beta_zero(params)
    if not (math.isfinite(b0) and b0 > 0) or d_beta(params, b0) <= 0:
        raise NoPositiveRegion(f"d(beta) is not positive at beta_zero={b0} for {params}")

    def f(beta):
        return d_beta(params, beta)

    lo = b0 / 2
    while f(lo) > 0:
        lo /= 2
    beta_minus = optimize.bisect(f, lo, b0, xtol=BISECT_XTOL)

    hi = 2 * b0
    for _ in range(MAX_BRACKET_DOUBLINGS):
        if f(hi) < 0:
            break
        hi *= 2
    else:
        logger.debug("d(beta) stays positive up to beta=%g; beta_plus is infinite", hi)
        return beta_minus, math.inf
    beta_plus = optimize.bisect(f, b0, hi, xtol=BISECT_XTOL)
    return beta_minus, beta_plus


def dim_spectrum(params, beta):
    if not beta > 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    beta_minus, beta_plus = spectrum_bounds(params)
    return DimensionSpectrum(
        d=d_beta(params, beta),
        d_star=d_star(params, beta),
        beta_minus=beta_minus,
        beta_plus=beta_plus,
        beta_zero=beta_zero(params),
    )


def spectrum_table(params, n_grid):
    """Rows (beta, d(beta), d*(beta)) on a uniform grid of [beta_minus, beta_plus]."""
    if n_grid < 2:
        raise ParameterError(f"n_grid must be at least 2, got {n_grid}")
    beta_minus, beta_plus = spectrum_bounds(params)
    if not math.isfinite(beta_plus):
        beta_plus = 10 * beta_zero(params)
    grid = np.linspace(beta_minus, beta_plus, n_grid)
    return [(float(b), d_beta(params, b), d_star(params, b)) for b in grid]


def _prefactor_arguments(params, mu):
    a, rho = params.a, params.rho
    return (
        2 - 2 * a + 2 * mu,
        2 - 4 * a - a * rho + mu,
        2 - 2 * a + mu,
        2 - 4 * a - a * rho + 2 * mu,
    )


def one_point_prefactor(params, sp):
    """K = G(2-2a+2mu) G(2-4a-a rho+mu) / (G(2-2a+mu) G(2-4a-a rho+2mu))."""
    num1, num2, den1, den2 = args = _prefactor_arguments(params, sp.mu)
    if min(args) <= 0:
        raise GammaPole(f"Gamma arguments must be positive, got {args}")
    return float(np.exp(
        special.gammaln(num1) + special.gammaln(num2) - special.gammaln(den1) - special.gammaln(den2)
    ))

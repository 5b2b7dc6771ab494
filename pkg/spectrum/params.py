"""
Physical parameters of a one-force-point SLE_kappa(rho) and the exponent
algebra derived from them.

The capacity parametrization is hcap(K_t) = a*t with a = 2/kappa, so the
driving Brownian motion has unit variance.
"""
import enum
import logging
import math
import warnings
from dataclasses import dataclass

from .exceptions import MuCNonpositiveWarning, ParameterError, Unclassified, ZetaOutOfRange

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SleParams:
    """kappa, rho, the tracked point x and the force point x_r."""

    kappa: float
    rho: float
    x: float = 1.0
    x_r: float = 0.0

    def __post_init__(self):
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise ParameterError(f"kappa must be a positive finite number, got {self.kappa}")
        if not self.rho > -2:
            raise ParameterError(f"rho must exceed -2, got {self.rho}")
        if not self.x_r >= 0:
            raise ParameterError(f"x_r must be nonnegative, got {self.x_r}")
        if not self.x > self.x_r:
            raise ParameterError(f"x must lie to the right of x_r, got x={self.x}, x_r={self.x_r}")

    def __str__(self):
        return f"SLE_{self.kappa:g}({self.rho:g}) x={self.x:g} x_r={self.x_r:g}"

    @property
    def a(self):
        return 2.0 / self.kappa

    @property
    def mu_c(self):
        return 2 * self.a - 0.5 + self.a * self.rho / 2

    @property
    def q0(self):
        """Initial value (x - x_r)/x of the harmonic-measure ratio Q."""
        return (self.x - self.x_r) / self.x

    @property
    def bessel_dimension(self):
        """Dimension of the Bessel process V - W."""
        return 1 + self.a * (2 + self.rho)

    @property
    def hits_boundary(self):
        return self.rho < self.kappa / 2 - 2

    def with_point(self, x, x_r=None):
        """Same kappa and rho, different tracked point."""
        return SleParams(self.kappa, self.rho, x, self.x_r if x_r is None else x_r)


@dataclass(frozen=True)
class SpectrumParams:
    """The exponents (mu_c, zeta, mu, beta) attached to one value of zeta."""

    mu_c: float
    zeta: float
    mu: float
    beta: float

    def roundtrip_zeta(self, a):
        return (a / self.beta + self.mu_c) * (a / self.beta - self.mu_c) / (2 * a)


class PhaseClass(enum.Enum):
    NO_HIT = 'NoHit'
    HIT_CANNOT_CONTINUE = 'HitCannotContinue'
    HIT_INTERVAL_CONTINUE = 'HitIntervalContinue'
    HIT_BOUNCE_EMPTY_INTERIOR = 'HitBounceEmptyInterior'

    def __str__(self):
        return self.value


def zeta_lower_bound(params):
    return -params.mu_c ** 2 / (2 * params.a)


def spectrum_params(params, zeta):
    """Exponents for a given zeta > -mu_c^2/(2a)."""
    a, mu_c = params.a, params.mu_c
    if not zeta > zeta_lower_bound(params):
        raise ZetaOutOfRange(f"zeta={zeta} must exceed -mu_c^2/(2a) = {zeta_lower_bound(params)}")
    if mu_c <= 0:
        warnings.warn(
            f"mu_c={mu_c} is nonpositive; beta at zeta=0 is a/|mu_c|",
            MuCNonpositiveWarning,
            stacklevel=2,
        )
    root = math.sqrt(mu_c ** 2 + 2 * a * zeta)
    return SpectrumParams(mu_c=mu_c, zeta=zeta, mu=mu_c + root, beta=a / root)


def spectrum_params_from_beta(params, beta):
    if not beta > 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    a, mu_c = params.a, params.mu_c
    mu = a / beta + mu_c
    zeta = (a / beta + mu_c) * (a / beta - mu_c) / (2 * a)
    return SpectrumParams(mu_c=mu_c, zeta=zeta, mu=mu, beta=beta)


def spectrum_params_from_mu(params, mu):
    a, mu_c = params.a, params.mu_c
    if not mu > mu_c:
        raise ParameterError(f"mu must exceed mu_c={mu_c}, got {mu}")
    return SpectrumParams(mu_c=mu_c, zeta=mu * (mu - 2 * mu_c) / (2 * a), mu=mu, beta=a / (mu - mu_c))


def boundary_phase(kappa, rho_bar):
    """Which boundary behaviour a cumulative force-point weight rho_bar produces."""
    if not kappa > 0:
        raise ParameterError(f"kappa must be positive, got {kappa}")
    upper = kappa / 2 - 2
    lower = kappa / 2 - 4
    if rho_bar >= upper:
        return PhaseClass.NO_HIT
    if rho_bar > max(-2.0, lower):
        return PhaseClass.HIT_BOUNCE_EMPTY_INTERIOR
    if kappa < 4 and lower < rho_bar <= -2:
        return PhaseClass.HIT_CANNOT_CONTINUE
    if kappa > 4 and -2 < rho_bar <= lower:
        return PhaseClass.HIT_INTERVAL_CONTINUE
    raise Unclassified(f"rho_bar={rho_bar} lies below every regime for kappa={kappa}")

"""
The good event on a realized tilted path and the local martingale M_t.

The band is |L~_s - beta (1 + rho/2) s| <= u sqrt(s) log(2 + s) + c + lambda_boost,
evaluated at every grid point of the path.
"""
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from spectrum.conf import lab_settings
from spectrum.exceptions import ParameterError


@dataclass(frozen=True)
class GoodEventParams:
    u: float
    c_const: float
    lambda_boost: float

    def __post_init__(self):
        if not self.u > 0:
            raise ParameterError(f"u must be positive, got {self.u}")

    @classmethod
    def defaults(cls):
        return cls(**lab_settings.GOOD_EVENT)

    @property
    def constant(self):
        return self.c_const + self.lambda_boost

    def band(self, s):
        s = np.asarray(s, dtype=float)
        return self.u * np.sqrt(s) * np.log(2 + s) + self.constant


class GoodEvent(NamedTuple):
    indicator: int
    margin: float


def _window(tp, t_max):
    if t_max < 0 or t_max > tp.s_max + 1e-9 * max(tp.ds, 1.0):
        raise ParameterError(f"path covers [0, {tp.s_max:.6g}], cannot evaluate up to {t_max}")
    return int(math.floor(t_max / tp.ds + 1e-9)) + 1


def good_event_indicator(tp, gep, t_max):
    k = _window(tp, t_max)
    s = tp.s[:k]
    slope = tp.sp.beta * (1 + tp.params.rho / 2)
    slack = gep.band(s) - np.abs(tp.l[:k] - slope * s)
    margin = float(np.min(slack))
    return GoodEvent(indicator=int(margin >= 0), margin=margin)


def setbounds_holds(tp, gep, t_max):
    """psi^-1 e^{-a beta(1+rho/2) s} <= g~'_s <= psi e^{-a beta(1+rho/2) s} at every grid s.

    psi(s) = exp(a * band(s)), the sandwich implied by the band with the
    enlarged constant.
    """
    k = _window(tp, t_max)
    s = tp.s[:k]
    a = tp.params.a
    centre = -a * tp.sp.beta * (1 + tp.params.rho / 2) * s
    return bool(np.all(np.abs(tp.log_gprime[:k] - centre) <= a * gep.band(s) + 1e-12))


def martingale_value(obs, sp, t):
    """M_t = g'^zeta Q^mu delta^(-mu(1+rho/2)) at the grid row of t; 0 once Q has reached 0."""
    if obs.params is None:
        raise ParameterError("observables carry no SLE parameters")
    k = obs.index_at(t)
    if not obs.q[k] > 0 and sp.mu > 0:
        return 0.0
    exponent = sp.mu * (1 + obs.params.rho / 2)
    log_m = sp.zeta * obs.log_gprime[k] + sp.mu * math.log(obs.q[k]) - exponent * math.log(obs.delta[k])
    return math.exp(log_m)

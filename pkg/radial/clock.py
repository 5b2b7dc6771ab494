"""
Radial parametrization t~(s) of a tracked point.

The clock s(t) solves ds = Q / ((1 - Q) f^2) dt, which makes

    delta_{t~(s)} = (x - x_r) exp(-a s)

and, in the new time, d log g' = -a (1 - Q)/Q ds.

Rules:

* ``slit`` integrates the clock in closed form over each grid interval, with
  the driver frozen at the value the flow used there. With u = g - w and
  d = V - w the integrand is (u - d)/(d u^2) and u^2 - d^2 is constant, so

      a ds = log((u1 + d1) u0 / ((u0 + d0) u1))

  plus log(v_k / (u0 - d0)) when the force point sits left of the frozen
  value at the start of the step.
* ``trapezoid`` applies the trapezoid rule to the grid values of the
  integrand and switches to the closed form on steps that come within
  sqrt(2 a dt) of the force point, where the integrand blows up like 1/sqrt.
* ``delta`` reads the clock off log delta; it only serves as a cross-check.
"""
import logging
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from loewner.exceptions import NotReached
from loewner.trace import hitting_time
from spectrum.exceptions import ParameterError

from .exceptions import ClockStallWarning

logger = logging.getLogger(__name__)

CLOCK_RULES = ('slit', 'trapezoid', 'delta')


@dataclass
class RadialClock:
    """Monotone pairs (t_k, s_k) on the capacity grid of one observable series."""

    t: np.ndarray
    s: np.ndarray
    a: float
    rule: str = 'slit'

    @property
    def s_max(self):
        return float(self.s[-1])

    def t_of(self, s):
        """t~(s): first capacity time at which the clock reads s."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0) or np.any(s > self.s_max):
            raise NotReached(f"radial time outside [0, {self.s_max:.6g}]")
        if len(self.s) == 1:
            out = np.zeros_like(s)
        else:
            hi = np.clip(np.searchsorted(self.s, s, side='left'), 1, len(self.s) - 1)
            lo = hi - 1
            width = self.s[hi] - self.s[lo]
            frac = np.where(width > 0, (s - self.s[lo]) / np.where(width > 0, width, 1.0), 0.0)
            out = self.t[lo] + np.clip(frac, 0.0, 1.0) * (self.t[hi] - self.t[lo])
        return float(out) if out.ndim == 0 else out

    def s_of(self, t):
        out = np.interp(t, self.t, self.s)
        return float(out) if np.ndim(out) == 0 else out

    def resample(self, series, s_grid):
        """Values of a capacity-time series at t~(s) for each s in s_grid."""
        return np.interp(self.t_of(np.asarray(s_grid, dtype=float)), self.t, np.asarray(series)[:len(self.t)])

    def uniform(self, ds):
        """Pairs (s_j, t~(s_j)) on the uniform grid s_j = j ds."""
        s_grid = np.arange(int(math.floor(self.s_max / ds + 1e-9)) + 1) * ds
        return s_grid, self.t_of(s_grid)


def _frozen_steps(obs, k_end):
    if obs.w_step is not None:
        return np.asarray(obs.w_step[:k_end - 1], dtype=float)
    # W is g - f on the grid
    w = obs.g[:k_end] - obs.f[:k_end]
    return 0.5 * (w[:-1] + w[1:])


def _slit_steps(obs, k_end):
    """Closed-form clock increment over each of the first k_end - 1 grid intervals."""
    w_step = _frozen_steps(obs, k_end)
    cap = 2 * obs.a * obs.dt
    u0 = obs.g[:k_end - 1] - w_step
    d0 = np.clip(obs.force[:k_end - 1] - w_step, 0.0, u0)
    u1 = np.sqrt(u0 * u0 + cap)
    d1 = np.sqrt(d0 * d0 + cap)
    with np.errstate(divide='ignore', invalid='ignore'):
        jump = np.log(obs.v[:k_end - 1] / (u0 - d0))
        flow = np.log((u1 + d1) / (u0 + d0)) + np.log(u0 / u1)
    return np.maximum(jump + flow, 0.0) / obs.a


def _trapezoid_steps(obs, k_end):
    q, f, v = obs.q[:k_end], obs.f[:k_end], obs.v[:k_end]
    gap = f - v
    with np.errstate(divide='ignore', invalid='ignore'):
        integrand = q / (gap * f)
    steps = 0.5 * (integrand[:-1] + integrand[1:]) * obs.dt
    near = ~(np.minimum(gap[:-1], gap[1:]) > math.sqrt(2 * obs.a * obs.dt)) | ~np.isfinite(steps)
    if near.any():
        steps = np.where(near, _slit_steps(obs, k_end), steps)
    return steps


def _delta_steps(obs, k_end):
    return -np.diff(np.log(obs.delta[:k_end])) / obs.a


def radial_clock(obs, rule='slit'):
    if rule not in CLOCK_RULES:
        raise ParameterError(f"rule must be one of {CLOCK_RULES}, got {rule!r}")
    series = obs.delta if rule == 'delta' else obs.v
    live = np.isfinite(series) & (series > 0)
    k_end = len(series) if live.all() else int(np.argmin(live))
    if k_end == 0:
        raise ParameterError("observable series has no row with positive v and delta")
    t = obs.t[:k_end]
    steps = {'slit': _slit_steps, 'trapezoid': _trapezoid_steps, 'delta': _delta_steps}[rule](obs, k_end)
    s = np.maximum.accumulate(np.concatenate([[0.0], np.cumsum(steps)]))
    stalls = int(np.count_nonzero(np.diff(s) == 0))
    if stalls:
        warnings.warn(f"radial clock stalled on {stalls} steps", ClockStallWarning, stacklevel=2)
        logger.warning("radial clock (%s) stalled on %d of %d steps", rule, stalls, k_end - 1)
    return RadialClock(t=t, s=s, a=obs.a, rule=rule)


def tilde_log_gprime(clock, obs, s_grid):
    """log g~'_s = -a * integral of (1 - Q~)/Q~ over the s-grid (trapezoid)."""
    s_grid = np.asarray(s_grid, dtype=float)
    q = clock.resample(obs.q, s_grid)
    with np.errstate(divide='ignore'):
        integrand = (1 - q) / q
    steps = 0.5 * (integrand[:-1] + integrand[1:]) * np.diff(s_grid)
    return -clock.a * np.concatenate([[0.0], np.cumsum(steps)])


def c_star(x, x_r, a):
    return max((math.log(x) + math.log(4)) / a, (math.log(4) - math.log(x - x_r)) / a)


class TimeSandwich(NamedTuple):
    lower: float
    tau: float
    upper: float

    @property
    def holds(self):
        return self.lower <= self.tau <= self.upper


def time_sandwich(obs, s, trace=None):
    """t~((s/a - C*) v 0) <= tau_s <= t~(s/a + C*).

    Raises NotReached when tau_s itself is not reached; an unreached upper
    bound is reported as infinity.
    """
    c = c_star(obs.x, obs.x_r, obs.a)
    tau = hitting_time(obs, s, mode='trace', trace=trace)
    lower = hitting_time(obs, max(s / obs.a - c, 0.0), mode='radial')
    try:
        upper = hitting_time(obs, s / obs.a + c, mode='radial')
    except NotReached:
        upper = math.inf
    return TimeSandwich(lower=lower, tau=tau, upper=upper)

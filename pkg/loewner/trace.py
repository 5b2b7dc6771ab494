"""
Approximate curve points and derived hitting times.

The tip at t_k is the frozen driver value of interval k-1 plus i*eps, pulled
back through the inverse slit maps of the grid intervals k-1, ..., 0.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from spectrum.exceptions import ParameterError

from .exceptions import BranchFailure, NotReached
from .maps import slit_step_inverse

logger = logging.getLogger(__name__)

MIN_TRACE_EPS = 1e-6
MAX_TRACE_EPS = 1e-1
HITTING_MODES = ('radial', 'trace')


@dataclass
class TracePolyline:
    """eta(t_k) for k = 0..n; the first point is 0."""

    points: np.ndarray
    dt: float
    tip_tolerance: float

    def __len__(self):
        return len(self.points)

    @property
    def times(self):
        return np.arange(len(self.points)) * self.dt

    @property
    def csv_header(self):
        return ['re', 'im']

    def csv_rows(self):
        return np.column_stack([self.points.real, self.points.imag])


def trace_points(driver, eps):
    if not MIN_TRACE_EPS < eps < MAX_TRACE_EPS:
        raise ParameterError(f"eps must lie in ({MIN_TRACE_EPS}, {MAX_TRACE_EPS}), got {eps}")
    n = driver.n_steps
    w_step = driver.w_step
    tips = np.asarray(w_step, dtype=complex) + 1j * eps
    # after the pass for interval j, tips[j:] live in the domain at time t_j
    for j in range(n - 1, -1, -1):
        tips[j:] = slit_step_inverse(tips[j:], w_step[j], driver.a, driver.dt)
        if not np.all(np.isfinite(tips[j:])) or tips[j:].imag.min() < -eps:
            raise BranchFailure(f"pull-back left the upper half-plane at interval {j}")
    points = np.concatenate([[0j], tips])
    logger.debug("extracted %d trace points with eps=%g", len(points), eps)
    return TracePolyline(points=points, dt=driver.dt, tip_tolerance=eps)


def distance_to_trace(trace, x):
    """dist(x, eta[0, t_k]) for every k: running minimum over polyline segments."""
    p = trace.points
    if len(p) == 1:
        return np.array([abs(x - p[0])])
    start, seg = p[:-1], p[1:] - p[:-1]
    length2 = np.abs(seg) ** 2
    along = np.where(length2 > 0, ((x - start) * seg.conj()).real / np.where(length2 > 0, length2, 1.0), 0.0)
    nearest = start + np.clip(along, 0.0, 1.0) * seg
    per_segment = np.abs(x - nearest)
    return np.minimum.accumulate(np.concatenate([[abs(x - p[0])], per_segment]))


def _first_crossing(times, values, level):
    """First time the piecewise-linear series drops to ``level``."""
    below = np.flatnonzero(values <= level)
    if len(below) == 0:
        raise NotReached(f"series never drops to {level:.6g}")
    k = int(below[0])
    if k == 0:
        return 0.0
    v0, v1 = values[k - 1], values[k]
    frac = (v0 - level) / (v0 - v1) if v0 > v1 else 1.0
    return float(times[k - 1] + frac * (times[k] - times[k - 1]))


def hitting_time(obs, s, mode='radial', trace=None):
    """Radial mode: first t with delta_t <= (x - x_r) e^{-a s}.

    Trace mode: first t with dist(x, eta[0, t]) <= e^{-s}, defined for
    s > -log(x - x_r); pass a TracePolyline to reuse one already extracted.
    """
    if mode not in HITTING_MODES:
        raise ParameterError(f"mode must be one of {HITTING_MODES}, got {mode!r}")
    if s < 0:
        raise ParameterError(f"s must be nonnegative, got {s}")
    if mode == 'radial':
        delta = obs.delta
        live = np.isfinite(delta) & (delta > 0)
        log_level = math.log(obs.x - obs.x_r) - obs.a * s
        return _first_crossing(obs.t[live], np.log(delta[live]), log_level)
    start = -math.log(obs.x - obs.x_r)
    if s <= max(0.0, start):
        raise ParameterError(f"s={s} must exceed -log(x - x_r) = {start:.6g} in trace mode")
    if trace is None:
        trace = trace_points(obs.driver, 1e-3)
    return _first_crossing(trace.times, distance_to_trace(trace, obs.x), math.exp(-s))

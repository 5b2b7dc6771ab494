"""
Boundary observables of a Loewner chain along a discretized driver.

For a tracked point x > x_r:

    f = g(x) - W,  v = g(x) - V,  delta = v / g'(x),  Q = v / f.

Each grid interval applies the exact slit map of a frozen driver value to
g(x) and to the force-point image V. For a simulated one-point driver the
frozen value is the one that carries V_k to V_{k+1} (see slit_driver), so
the flowed force point is the driver's own V; otherwise it is the midpoint
of W and V is re-attached inside [W, g(x)]. Either way 0 <= Q <= 1 at grid
times and delta is nonincreasing.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from spectrum.conf import lab_settings
from spectrum.exceptions import ParameterError
from spectrum.params import SleParams

from .exceptions import RightmostUndefined, SwallowedPoint

logger = logging.getLogger(__name__)

OBSERVABLE_COLUMNS = ('t', 'f', 'log_gprime', 'v', 'delta', 'q')
RIGHTMOST_GRID = 64
RIGHTMOST_REFINEMENTS = 5


@dataclass
class FlowState:
    """Observables of every column at grid index k."""

    k: int
    t: float
    g: np.ndarray
    force: np.ndarray
    log_gprime: np.ndarray
    f: np.ndarray
    v: np.ndarray
    delta: np.ndarray
    q: np.ndarray
    alive: np.ndarray
    swallow_time: np.ndarray


def q_of(v, f):
    return np.clip(np.where(f > 0, v / np.where(f > 0, f, 1.0), 0.0), 0.0, 1.0)


def _frozen_values(w2, w_step):
    if w_step is None:
        return 0.5 * (w2[:-1] + w2[1:])
    frozen = np.asarray(w_step, dtype=float)
    if frozen.ndim == 1:
        frozen = frozen[:, None]
    if frozen.shape[0] != w2.shape[0] - 1:
        raise ParameterError(f"w_step needs one value per grid interval, got {frozen.shape[0]} for {w2.shape[0] - 1}")
    return frozen


def iter_flow(w, dt, a, x, x_r=0.0, swallow_eps_factor=None, w_step=None):
    """Yield a FlowState for k = 0, 1, ... while any column is alive.

    ``w`` is (n+1,) or (n+1, ...); the trailing axes of ``w`` broadcast against
    ``x``, so a 1-d driver with an array of points tracks all of them along
    the same path and w[:, :, None] with x of shape (N,) gives P x N columns.
    ``w_step`` holds the frozen driver value of each interval (midpoints when
    omitted). A column dies when the driver passes g(x) or when g(x) merges
    with the force-point image; it keeps its last values with ``alive`` False.
    """
    if swallow_eps_factor is None:
        swallow_eps_factor = lab_settings.SWALLOW_EPS_FACTOR
    w2 = np.asarray(w, dtype=float)
    if w2.ndim == 1:
        w2 = w2[:, None]
    frozen = _frozen_values(w2, w_step)
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    shape = np.broadcast_shapes(w2.shape[1:], x_arr.shape)
    x_arr = np.broadcast_to(x_arr, shape).copy()
    x_r_arr = np.broadcast_to(np.asarray(x_r, dtype=float), shape).copy()
    if np.any(x_arr <= x_r_arr):
        raise ParameterError("tracked points must lie to the right of the force point")
    eps = swallow_eps_factor * (x_arr - x_r_arr)
    n = w2.shape[0] - 1
    cap = 2 * a * dt

    g = x_arr.copy()
    force = x_r_arr.copy()
    log_gp = np.zeros(shape)
    alive = np.ones(shape, dtype=bool)
    swallow_time = np.full(shape, np.inf)
    f = g - w2[0]
    v = g - force
    yield FlowState(0, 0.0, g, force, log_gp, f, v, v.copy(), q_of(v, f), alive, swallow_time)

    for k in range(n):
        w_k = frozen[k]
        u0 = g - w_k
        passed = alive & (u0 <= eps)
        if passed.any():
            # frozen value reached g(x) inside the step
            frac = np.clip((f - eps) / np.where(f - u0 > 0, f - u0, 1.0), 0.0, 1.0)
            swallow_time = np.where(passed, (k + 0.5 * frac) * dt, swallow_time)
            alive = alive & ~passed
        u0 = np.where(alive, u0, 1.0)
        u = np.sqrt(u0 * u0 + cap)
        d0 = np.clip(force - w_k, 0.0, u0)
        d1 = np.sqrt(d0 * d0 + cap)
        g_next = w_k + u
        f_next = g_next - w2[k + 1]
        force_next = np.minimum(np.maximum(w_k + d1, w2[k + 1]), g_next)
        v_next = g_next - force_next
        landed = alive & ((f_next <= eps) | (v_next <= eps))
        if landed.any():
            gap_now = np.minimum(f, v)
            gap_next = np.minimum(f_next, v_next)
            span = gap_now - gap_next
            frac = np.clip((gap_now - eps) / np.where(span > 0, span, 1.0), 0.0, 1.0)
            swallow_time = np.where(landed, (k + frac) * dt, swallow_time)
            alive = alive & ~landed
        if not alive.any():
            yield FlowState(k + 1, (k + 1) * dt, g, force, log_gp, f, g - force,
                            (g - force) * np.exp(-log_gp), q_of(g - force, f), alive, swallow_time)
            return
        g = np.where(alive, g_next, g)
        force = np.where(alive, force_next, force)
        log_gp = np.where(alive, log_gp + np.log(u0 / u), log_gp)
        f = np.where(alive, f_next, f)
        v = g - force
        delta = v * np.exp(-log_gp)
        q = q_of(v, f)
        yield FlowState(k + 1, (k + 1) * dt, g, force, log_gp, f, v, delta, q, alive, swallow_time)

@dataclass
class ObservableBatch:
    """Full time series of many columns; NaN after each column is swallowed."""

    t: np.ndarray
    g: np.ndarray
    force: np.ndarray
    log_gprime: np.ndarray
    f: np.ndarray
    v: np.ndarray
    delta: np.ndarray
    q: np.ndarray
    swallow_time: np.ndarray
    last_index: np.ndarray


def evolve_batch(w, dt, a, x, x_r=0.0, swallow_eps_factor=None, w_step=None):
    names = ('g', 'force', 'log_gprime', 'f', 'v', 'delta', 'q')
    n_rows = np.asarray(w).shape[0]
    series = None
    last_index = None
    state = None
    for state in iter_flow(w, dt, a, x, x_r, swallow_eps_factor, w_step):
        if series is None:
            shape = state.g.shape
            series = {name: np.full((n_rows, *shape), np.nan) for name in names}
            last_index = np.zeros(shape, dtype=int)
        for name in names:
            series[name][state.k] = np.where(state.alive, getattr(state, name), np.nan)
        last_index = np.where(state.alive, state.k, last_index)
    k_end = int(last_index.max()) + 1
    return ObservableBatch(
        t=np.arange(k_end) * dt,
        swallow_time=state.swallow_time,
        last_index=last_index,
        **{name: values[:k_end] for name, values in series.items()},
    )


class DeltaCrossings(NamedTuple):
    reached: np.ndarray
    t: np.ndarray
    log_gprime: np.ndarray
    censored: np.ndarray


def delta_crossings(w, dt, a, x, x_r=0.0, log_level=0.0, swallow_eps_factor=None, w_step=None):
    """First time log delta <= log_level in every column, with log g' there.

    ``log_level`` broadcasts against the column shape, which lets one pass
    serve several levels. The flow stops as soon as every column has crossed.
    Columns still alive but uncrossed at the end of the driver are censored.
    """
    level = np.asarray(log_level, dtype=float)
    reached = t_cross = log_gp = None
    prev_delta = prev_gp = None
    state = None
    for state in iter_flow(w, dt, a, x, x_r, swallow_eps_factor, w_step):
        with np.errstate(divide='ignore'):
            log_delta = np.log(state.delta)
        if reached is None:
            shape = np.broadcast_shapes(level.shape, state.g.shape)
            reached = np.broadcast_to(log_delta <= level, shape).copy()
            t_cross = np.where(reached, 0.0, np.inf)
            log_gp = np.where(reached, 0.0, np.nan)
        else:
            hit = state.alive & ~reached & (log_delta <= level)
            if hit.any():
                span = prev_delta - log_delta
                frac = np.clip(np.where(span > 0, (prev_delta - level) / np.where(span > 0, span, 1.0), 1.0), 0.0, 1.0)
                t_cross = np.where(hit, (state.k - 1 + frac) * dt, t_cross)
                log_gp = np.where(hit, prev_gp + frac * (state.log_gprime - prev_gp), log_gp)
                reached = reached | hit
        if reached.all():
            break
        prev_delta, prev_gp = log_delta, state.log_gprime
    censored = ~reached & np.broadcast_to(state.alive, reached.shape)
    return DeltaCrossings(reached=reached, t=t_cross, log_gprime=log_gp, censored=censored)


@dataclass
class LoewnerObservables:
    """Time series of one tracked point along one driver."""

    x: float
    x_r: float
    a: float
    dt: float
    t: np.ndarray
    g: np.ndarray
    force: np.ndarray
    f: np.ndarray
    log_gprime: np.ndarray
    v: np.ndarray
    delta: np.ndarray
    q: np.ndarray
    swallow_time: Optional[float]
    driver: object = field(repr=False)
    params: Optional[SleParams] = field(default=None, repr=False)
    w_step: Optional[np.ndarray] = field(default=None, repr=False)

    def __str__(self):
        ends = 'swallowed at %.6g' % self.swallow_time if self.swallow_time is not None else 'not swallowed'
        return f"observables x={self.x:g} over {len(self.t)} rows, {ends}"

    @property
    def last_time(self):
        return float(self.t[-1])

    def index_at(self, t):
        """Grid index of the last row at or before t."""
        if t < 0:
            raise ParameterError(f"t must be nonnegative, got {t}")
        if self.swallow_time is not None and t >= self.swallow_time:
            raise SwallowedPoint(f"x={self.x} is swallowed at {self.swallow_time:.6g} <= t={t}")
        k = int(math.floor(t / self.dt + 1e-9))
        if k >= len(self.t):
            raise SwallowedPoint(f"t={t} lies past the end of the series ({self.last_time})")
        return k

    def value_at(self, name, t):
        """Linear interpolation of a series between grid rows."""
        k = self.index_at(t)
        series = getattr(self, name)
        if k + 1 >= len(series):
            return float(series[k])
        frac = t / self.dt - k
        return float((1 - frac) * series[k] + frac * series[k + 1])

    def rightmost(self, t):
        return rightmost_swallowed(self.driver, self.x, t)

    @property
    def csv_header(self):
        return list(OBSERVABLE_COLUMNS)

    def csv_rows(self):
        return np.column_stack([self.t, self.f, self.log_gprime, self.v, self.delta, self.q])


def evolve_observables(driver, x, swallow_eps_factor=None):
    if not x > driver.x_r:
        raise ParameterError(f"x={x} must lie to the right of x_r={driver.x_r}")
    w_step = driver.w_step
    batch = evolve_batch(driver.w, driver.dt, driver.a, x, driver.x_r, swallow_eps_factor, w_step)
    swallow = float(batch.swallow_time[0])
    return LoewnerObservables(
        x=float(x),
        x_r=float(driver.x_r),
        a=driver.a,
        dt=driver.dt,
        t=batch.t,
        g=batch.g[:, 0],
        force=batch.force[:, 0],
        f=batch.f[:, 0],
        log_gprime=batch.log_gprime[:, 0],
        v=batch.v[:, 0],
        delta=batch.delta[:, 0],
        q=batch.q[:, 0],
        swallow_time=swallow if math.isfinite(swallow) else None,
        driver=driver,
        params=driver.params,
        w_step=w_step[:len(batch.t) - 1],
    )


def _swallowed_by(driver, k, points):
    """Which real points in ``points`` are swallowed within the first k steps."""
    last = None
    for last in iter_flow(driver.w[:k + 1], driver.dt, driver.a, points, 0.0, w_step=driver.w_step[:k]):
        pass
    if last is None or last.k < k:
        return np.ones(len(points), dtype=bool)
    return ~last.alive


def rightmost_swallowed(driver, x, t):
    """r_t: supremum of the points of (0, x) swallowed by time t (0 if none)."""
    k = int(math.floor(t / driver.dt + 1e-9))
    if k == 0:
        return 0.0
    lo, hi = 0.0, float(x)
    for _ in range(RIGHTMOST_REFINEMENTS):
        grid = np.linspace(lo, hi, RIGHTMOST_GRID + 1)[1:-1]
        hit = _swallowed_by(driver, k, grid)
        if not hit.any():
            hi = grid[0]
            continue
        j = int(np.flatnonzero(hit)[-1])
        lo = grid[j]
        hi = grid[j + 1] if j + 1 < len(grid) else hi
    return float(lo)


def harmonic_measure_infinity(obs, t, offset_eps_factor=None):
    """omega_infinity((r_t, x], H_t) = (g_t(x) - O_t) / pi."""
    if offset_eps_factor is None:
        offset_eps_factor = lab_settings.OFFSET_EPS_FACTOR
    k = obs.index_at(t)
    if obs.x_r == 0:
        return float(obs.v[k]) / math.pi
    y = obs.rightmost(t) + offset_eps_factor * obs.x
    last = None
    for last in iter_flow(obs.driver.w[:k + 1], obs.dt, obs.a, y, 0.0, w_step=obs.driver.w_step[:k]):
        pass
    if last is None or last.k < k or not last.alive[0]:
        raise RightmostUndefined(f"offset point {y:.6g} is swallowed by t={t}")
    return float(obs.g[k] - last.g[0]) / math.pi


def force_point_martingale(driver, kappa, cfg, t):
    """Multi-point SLE_kappa martingale at time t along a plain SLE_kappa driver.

    Products run over the force points: |g'(x_j)| and |W - V_j| powers, and
    |V_i - V_j| powers over unordered pairs.
    """
    points = np.array(cfg.x_right + cfg.x_left, dtype=float)
    rhos = np.array(cfg.rho_right + cfg.rho_left, dtype=float)
    if np.any(points == 0):
        raise ParameterError("force points must be away from the origin")
    k = int(math.floor(t / driver.dt + 1e-9))
    if k > driver.n_steps:
        raise ParameterError(f"t={t} lies past the end of the driver")
    a = 2.0 / kappa
    cap = 2 * a * driver.dt
    sign = np.sign(points)
    images = points.copy()
    log_gp = np.zeros_like(points)
    w_step = driver.w_step
    for j in range(k):
        u0 = images - w_step[j]
        if np.any(sign * u0 <= 0):
            raise SwallowedPoint(f"a force point was swallowed before t={t}")
        u = sign * np.sqrt(u0 * u0 + cap)
        log_gp += np.log(u0 / u)
        images = w_step[j] + u
    w_t = driver.w[k]
    log_m = np.sum((4 - kappa + rhos) * rhos / (4 * kappa) * log_gp)
    log_m += np.sum(rhos / kappa * np.log(np.abs(w_t - images)))
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            log_m += rhos[i] * rhos[j] / (2 * kappa) * math.log(abs(images[i] - images[j]))
    return float(math.exp(log_m))

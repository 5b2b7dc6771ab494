"""
Discretized driving processes.

One force point: the gap D = V - W is a Bessel process of dimension
1 + a(2 + rho), advanced by the drift-implicit step

    D_{k+1} = (y + sqrt(y^2 + 4 c dt)) / 2,   y = D_k - dB_k,   c = a(1 + rho/2),

which stays positive without reflection. V follows dV = a/D dt and W = V - D.

Several force points: Euler-Maruyama on the coupled system, with local step
halving near collisions and merging of force points that the driver passes.
"""
import itertools
import logging
import math
import warnings

import numpy as np

from spectrum.exceptions import ParameterError

from .exceptions import NonHittingRegimeWarning, StepTooLarge
from .paths import DriverPath
from .streams import BRIDGE, MAIN, NormalStream, path_generator

logger = logging.getLogger(__name__)

MAX_DT = 1e-2
MAX_HALVINGS = 20
CONTINUATION_THRESHOLD = -2.0


def n_steps_for(dt, t_max):
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    if dt > MAX_DT:
        raise StepTooLarge(f"dt={dt} exceeds {MAX_DT}")
    if t_max < 0 or 0 < t_max < dt:
        raise ParameterError(f"t_max must be 0 or at least dt, got t_max={t_max}, dt={dt}")
    return int(math.floor(t_max / dt + 1e-9))


def bessel_gap_step(d, dB, c, dt):
    """Positive root of D' = d - dB + c dt / D', in a cancellation-free form."""
    y = np.asarray(d - dB, dtype=float)
    s = np.sqrt(y * y + 4 * c * dt)
    positive = y > 0
    denominator = np.where(positive, 1.0, s - y)
    return np.where(positive, 0.5 * (y + s), 2 * c * dt / denominator)


def simulate_driver_batch(params, dt, t_max, seed, path_indices):
    """(w, v) arrays of shape (n_steps + 1, len(path_indices))."""
    n = n_steps_for(dt, t_max)
    if not params.hits_boundary:
        warnings.warn(
            f"rho={params.rho} >= kappa/2 - 2: the curve does not hit the boundary",
            NonHittingRegimeWarning,
            stacklevel=2,
        )
    a = params.a
    c = a * (1 + params.rho / 2)
    stream = NormalStream(seed, path_indices, MAIN)
    n_paths = len(stream)
    w = np.empty((n + 1, n_paths))
    v = np.empty((n + 1, n_paths))
    w[0] = 0.0
    v[0] = params.x_r
    gap = np.full(n_paths, params.x_r, dtype=float)
    force = np.full(n_paths, params.x_r, dtype=float)
    sqrt_dt = math.sqrt(dt)
    for start, normals in stream.chunks(n):
        increments = normals * sqrt_dt
        for j, dB in enumerate(increments):
            gap = bessel_gap_step(gap, dB, c, dt)
            force = force + a * dt / gap
            k = start + j + 1
            v[k] = force
            w[k] = force - gap
    logger.debug("simulated %d driver paths with %d steps", n_paths, n)
    return w, v


def simulate_driver(params, dt, t_max, seed, path_index=0):
    w, v = simulate_driver_batch(params, dt, t_max, seed, [path_index])
    return DriverPath(
        dt=dt, w=w[:, 0], v=v[:, 0], a=params.a, x_r=params.x_r,
        seed=seed, path_index=path_index, params=params,
    )


class _MultiPointState:
    """Mutable Euler state of one multi-point path (plain floats: the arrays are tiny)."""

    def __init__(self, a, cfg, gap_floor):
        self.a = a
        self.cfg = cfg
        self.gap_floor = gap_floor
        self.w = 0.0
        self.right = [max(x, gap_floor) for x in cfg.x_right]
        self.left = [min(x, -gap_floor) for x in cfg.x_left]
        self.stopped = False

    def min_gap(self):
        gaps = [v - self.w for v in self.right] + [self.w - v for v in self.left]
        return min(gaps) if gaps else math.inf

    def euler(self, h, dB):
        a, w = self.a, self.w
        drift = 0.0
        for v, rho in zip(self.right, self.cfg.rho_right):
            drift += 0.5 * a * rho / (w - v)
        for v, rho in zip(self.left, self.cfg.rho_left):
            drift += 0.5 * a * rho / (w - v)
        self.right = [v + a * h / (v - w) for v in self.right]
        self.left = [v + a * h / (v - w) for v in self.left]
        self.w = w + drift * h + dB
        self.right = list(itertools.accumulate(self.right, max))
        self.left = list(itertools.accumulate(self.left, min))
        self._resolve_crossings()

    def _resolve_crossings(self):
        crossed = [j for j, v in enumerate(self.right) if v - self.w <= 0]
        if crossed:
            j = crossed[-1]
            if self.cfg.cumulative_right(j) <= CONTINUATION_THRESHOLD:
                self.stopped = True
                self.right[:j + 1] = [self.w] * (j + 1)
                return
            gap = max(abs(self.right[j] - self.w), self.gap_floor)
            self.right[:j + 1] = [self.w + gap] * (j + 1)
        crossed = [j for j, v in enumerate(self.left) if self.w - v <= 0]
        if crossed:
            j = crossed[-1]
            if self.cfg.cumulative_left(j) <= CONTINUATION_THRESHOLD:
                self.stopped = True
                self.left[:j + 1] = [self.w] * (j + 1)
                return
            gap = max(abs(self.w - self.left[j]), self.gap_floor)
            self.left[:j + 1] = [self.w - gap] * (j + 1)


def _advance(state, h, dB, depth, bridge):
    """One Euler step of size h, halved while a force point is within sqrt(h) of the driver."""
    if depth < MAX_HALVINGS and state.min_gap() < math.sqrt(h):
        first = 0.5 * dB + 0.5 * math.sqrt(h) * bridge.standard_normal()
        _advance(state, h / 2, first, depth + 1, bridge)
        if not state.stopped:
            _advance(state, h / 2, dB - first, depth + 1, bridge)
        return
    state.euler(h, dB)


def simulate_driver_multi(kappa, cfg, dt, t_max, seed, path_index=0):
    """Driver of SLE_kappa(rho_L; rho_R), stopped at the continuation threshold."""
    if not kappa > 0:
        raise ParameterError(f"kappa must be positive, got {kappa}")
    n = n_steps_for(dt, t_max)
    a = 2.0 / kappa
    state = _MultiPointState(a, cfg, gap_floor=math.sqrt(dt / 2 ** MAX_HALVINGS))
    increments = (path_generator(seed, path_index, MAIN).standard_normal(n) * math.sqrt(dt)).tolist()
    bridge = path_generator(seed, path_index, BRIDGE)

    w = [0.0]
    right = [list(cfg.x_right)]
    left = [list(cfg.x_left)]
    hit = None
    for k, dB in enumerate(increments, start=1):
        _advance(state, dt, dB, 0, bridge)
        w.append(state.w)
        right.append(list(state.right))
        left.append(list(state.left))
        if state.stopped:
            hit = k
            logger.debug("path %d hit the continuation threshold at step %d", path_index, k)
            break

    v_right = np.array(right, dtype=float).reshape(len(w), len(cfg.x_right))
    v_left = np.array(left, dtype=float).reshape(len(w), len(cfg.x_left))
    return DriverPath(
        dt=dt,
        w=np.array(w),
        v=v_right[:, 0] if cfg.x_right else None,
        a=a,
        x_r=cfg.x_right[0] if cfg.x_right else 0.0,
        seed=seed,
        path_index=path_index,
        v_right=v_right if cfg.x_right else None,
        v_left=v_left if cfg.x_left else None,
        continuation_hit=hit,
    )

"""
The ratio Q~ in radial time, with and without the Girsanov weight.

Under the weighted measure P*,

    dQ~ = [(1 - 2a - a rho/2 + mu) - (1 - a + mu) Q~] ds + sqrt(Q~ (1 - Q~)) dB~*,

and the unweighted process is the same SDE with mu = 0. L~_s integrates
(1 - Q~)/Q~, so that g~'_s = exp(-a L~_s).

Paths are stepped in theta with Q~ = sin^2 theta, where the noise is additive:

    dtheta = [(A - B/2) + (B/2 - 1/4) cos 2 theta] / sin 2 theta ds + dB/2,

with A - B q the drift above. Near q = 0 and q = 1 theta behaves like a Bessel
process of dimension 4A and 4(B - A). Steps that leave [0, pi/2] are reflected
back; the unweighted process is absorbed at q = 0 instead.
"""
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from drivers.exceptions import StepTooLarge
from drivers.streams import TILTED, NormalStream
from spectrum.conf import lab_settings
from spectrum.exceptions import ParameterError
from spectrum.params import SleParams, SpectrumParams

from .exceptions import StepRejectedWarning

logger = logging.getLogger(__name__)

MAX_DS = 1e-3


def drift_coefficients(params, mu=0.0):
    """(A, B) of the linear drift A - B q."""
    a, rho = params.a, params.rho
    return 1 - 2 * a - a * rho / 2 + mu, 1 - a + mu


def q_star(params, sp):
    """Zero of the weighted drift."""
    drift_a, drift_b = drift_coefficients(params, sp.mu)
    return drift_a / drift_b


def weight_exponent(params, sp):
    """mu (1 + rho/2): the power of delta in the weight."""
    return sp.mu * (1 + params.rho / 2)


@dataclass
class TiltedPath:
    """One path of Q~ on the uniform grid s_j = j ds."""

    ds: float
    q: np.ndarray
    l: np.ndarray
    m_weight: Optional[np.ndarray]
    seed: int
    path_index: int = 0
    params: Optional[SleParams] = field(default=None, repr=False)
    sp: Optional[SpectrumParams] = field(default=None, repr=False)

    @property
    def s(self):
        return np.arange(len(self.q)) * self.ds

    @property
    def s_max(self):
        return (len(self.q) - 1) * self.ds

    @property
    def log_gprime(self):
        return -self.params.a * self.l

    @property
    def csv_header(self):
        return ['s', 'q', 'l', 'm_weight']

    def csv_rows(self):
        weight = self.m_weight if self.m_weight is not None else np.full_like(self.q, np.nan)
        return np.column_stack([self.s, self.q, self.l, weight])


def _grid(ds, s_max):
    if not ds > 0:
        raise ParameterError(f"ds must be positive, got {ds}")
    if ds > MAX_DS:
        raise StepTooLarge(f"ds={ds} exceeds {MAX_DS}")
    if s_max < 0:
        raise ParameterError(f"s_max must be nonnegative, got {s_max}")
    return int(math.floor(s_max / ds + 1e-9))


def _record_rows(n, ds, record_s):
    if record_s is None:
        return np.arange(n + 1)
    rows = np.rint(np.asarray(record_s, dtype=float) / ds).astype(int)
    if np.any(rows < 0) or np.any(rows > n):
        raise ParameterError(f"recorded radial times must lie in [0, {n * ds}]")
    return rows


def _report_floor_hits(floored, total, label):
    if total and floored / total > lab_settings.CLAMP_WARN_FRACTION:
        warnings.warn(
            f"{label}: {floored} of {total} steps were held at the q floor",
            StepRejectedWarning,
            stacklevel=3,
        )
        logger.warning("%s: held %d of %d steps at the q floor", label, floored, total)


def angle_drift(theta, drift_a, drift_b, ds):
    """Drift of theta = arcsin(sqrt(Q~)), with sin(2 theta) floored at sqrt(ds)."""
    numerator = (drift_a - drift_b / 2) + (2 * drift_b - 1) / 4 * np.cos(2 * theta)
    return numerator / np.maximum(np.sin(2 * theta), math.sqrt(ds))


def _q_batch(params, drift_a, drift_b, ds, s_max, seed, path_indices, record_s, absorb, q_floor):
    n = _grid(ds, s_max)
    rows = _record_rows(n, ds, record_s)
    stream = NormalStream(seed, path_indices, TILTED)
    n_paths = len(stream)
    theta = np.full(n_paths, math.asin(math.sqrt(params.q0)))
    q = np.sin(theta) ** 2
    l = np.zeros(n_paths)
    alive = np.ones(n_paths, dtype=bool)
    q_out = np.empty((len(rows), n_paths))
    l_out = np.empty((len(rows), n_paths))
    wanted = {}
    for j, row in enumerate(rows):
        wanted.setdefault(int(row), []).append(j)

    def record(k):
        for j in wanted.get(k, ()):
            q_out[j] = q
            l_out[j] = l

    record(0)
    floored = reflected = 0
    theta_floor = math.asin(math.sqrt(q_floor))
    half_pi = 0.5 * math.pi
    noise_scale = 0.5 * math.sqrt(ds)
    with np.errstate(divide='ignore', invalid='ignore'):
        for start, normals in stream.chunks(n):
            for j, z in enumerate(normals):
                ratio = (1 - q) / q
                step = theta + angle_drift(theta, drift_a, drift_b, ds) * ds + noise_scale * z
                if absorb:
                    alive &= ~(step <= 0.0)
                else:
                    step = np.abs(step)
                over = step > half_pi
                reflected += int(np.count_nonzero(alive & over))
                step = np.where(over, np.pi - step, step)
                if not absorb:
                    low = step < theta_floor
                    floored += int(np.count_nonzero(low))
                    step = np.where(low, theta_floor, step)
                theta = np.where(alive, step, 0.0)
                q_next = np.sin(theta) ** 2
                l = np.where(alive, l + 0.5 * (ratio + (1 - q_next) / q_next) * ds, np.inf)
                q = q_next
                record(start + j + 1)
    _report_floor_hits(floored, n * n_paths, 'Q~ simulation')
    logger.debug("simulated %d Q~ paths with %d steps, %d reflections at q = 1", n_paths, n, reflected)
    return q_out, l_out


def tilted_weight(params, sp, s, q, l):
    """M~_s = (x - x_r)^(-mu(1+rho/2)) exp(-a zeta L~) Q~^mu exp(a mu (1+rho/2) s)."""
    k = weight_exponent(params, sp)
    log_m = (-k * math.log(params.x - params.x_r) - params.a * sp.zeta * l
             + sp.mu * np.log(q) + params.a * k * s)
    return np.exp(log_m)


def simulate_tilted_batch(params, sp, ds, s_max, seed, path_indices, record_s=None, q_floor=None):
    """(q, l) arrays of shape (len(record_s), P) under P*."""
    if q_floor is None:
        q_floor = lab_settings.Q_FLOOR
    drift_a, drift_b = drift_coefficients(params, sp.mu)
    return _q_batch(params, drift_a, drift_b, ds, s_max, seed, path_indices, record_s, False, q_floor)


def unweighted_q_sde_batch(params, ds, s_max, seed, path_indices, record_s=None):
    """(q, l) arrays without the weight; absorbed paths read q = 0, l = inf."""
    drift_a, drift_b = drift_coefficients(params)
    return _q_batch(params, drift_a, drift_b, ds, s_max, seed, path_indices, record_s, True, 0.0)


def simulate_tilted(params, sp, ds, s_max, seed, path_index=0):
    q, l = simulate_tilted_batch(params, sp, ds, s_max, seed, [path_index])
    q, l = q[:, 0], l[:, 0]
    s = np.arange(len(q)) * ds
    return TiltedPath(
        ds=ds, q=q, l=l, m_weight=tilted_weight(params, sp, s, q, l),
        seed=seed, path_index=path_index, params=params, sp=sp,
    )


def unweighted_q_sde(params, ds, s_max, seed, path_index=0):
    q, l = unweighted_q_sde_batch(params, ds, s_max, seed, [path_index])
    return TiltedPath(ds=ds, q=q[:, 0], l=l[:, 0], m_weight=None, seed=seed, path_index=path_index, params=params)

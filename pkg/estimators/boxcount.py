"""
Covering counts of [1, 2] by intervals of length e^{-n}/2.

For the midpoint x_j of each interval, the upper count asks whether
g'(x_j) >= c' e^{-beta(1 + rho/2) n} at the first time delta_t(x_j) drops
to e^{-(n-2)}; the lower count asks whether g~'(x_j) <= C_2 e^{-beta(1 + rho/2) n}
at radial time n/a + C_1. Both are averaged over paths.
"""
import logging
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from drivers.exceptions import NonHittingRegimeWarning
from drivers.simulate import simulate_driver_batch
from loewner.maps import slit_driver
from loewner.observables import delta_crossings
from spectrum.conf import lab_settings
from spectrum.dimension import covering_exponent
from spectrum.exceptions import ParameterError

from .exceptions import DegenerateFit, ResolutionExceeded
from .pool import gather, map_blocks

logger = logging.getLogger(__name__)

MAX_LEVEL = 10
LOWER_C2 = 1.0
BOXCOUNT_CSV_HEADER = ['n', 'count_upper', 'count_lower', 'grid_size']


def lower_c1(a):
    return (math.log(2) + math.log(4)) / a


def box_midpoints(n):
    """Midpoints x_{j,n} of the ceil(2 e^n) equal intervals covering [1, 2]."""
    size = math.ceil(2 * math.exp(n))
    return 1.0 + (np.arange(size) + 0.5) / size


@dataclass
class BoxCountReport:
    n: int
    beta: float
    grid_size: int
    upper_counts: np.ndarray
    lower_counts: np.ndarray

    @property
    def count_upper(self):
        """Path average of the upper count, an estimate of E[N_n(beta)]."""
        return float(np.mean(self.upper_counts))

    @property
    def count_lower(self):
        return float(np.mean(self.lower_counts))

    @property
    def n_paths(self):
        return len(self.upper_counts)

    def csv_row(self):
        return [self.n, self.count_upper, self.count_lower, self.grid_size]


class BoxIndicators(NamedTuple):
    """Per-path, per-interval indicators of shape (P, grid_size)."""

    upper: np.ndarray
    lower: np.ndarray


class BoxFit(NamedTuple):
    slope: float
    intercept: float
    target: float


def check_level(n, dt, resolution_factor):
    if not 1 <= n <= MAX_LEVEL:
        raise ParameterError(f"n must lie in [1, {MAX_LEVEL}], got {n}")
    if resolution_factor is None:
        resolution_factor = lab_settings.RESOLUTION_FACTOR
    if math.exp(-n) < resolution_factor * math.sqrt(dt):
        raise ResolutionExceeded(
            f"e^-{n} = {math.exp(-n):.3g} is below {resolution_factor:g} sqrt(dt) = {resolution_factor * math.sqrt(dt):.3g}"
        )


def _box_block(path_indices, params, n, dt, t_max, seed):
    """log g' at the upper and lower stopping times for every (path, midpoint)."""
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', NonHittingRegimeWarning)
        w, v = simulate_driver_batch(params, dt, t_max, seed, path_indices)
    x = box_midpoints(n)
    a = params.a
    upper_level = np.full_like(x, -(n - 2.0))
    lower_level = np.log(x - params.x_r) - a * (n / a + lower_c1(a))
    levels = np.stack([upper_level, lower_level])[:, None, :]
    w_step = slit_driver(w, v, a, dt)
    crossings = delta_crossings(w[:, :, None], dt, a, x, params.x_r, levels, w_step=w_step[:, :, None])
    log_gp = np.where(crossings.reached, crossings.log_gprime, np.nan)
    # (2, P, N) -> path axis last
    return np.moveaxis(log_gp[0], 0, -1), np.moveaxis(log_gp[1], 0, -1)


def box_count_indicators(params, sp, n, n_paths, dt, seed, t_max=4.0, workers=None, resolution_factor=None,
                         distortion=None):
    """Indicator sets of the upper and lower counts for each simulated path."""
    check_level(n, dt, resolution_factor)
    if distortion is None:
        distortion = lab_settings.DISTORTION_CONSTANT
    upper_gp, lower_gp = gather(map_blocks(
        _box_block, n_paths, workers, params=params, n=n, dt=dt, t_max=t_max, seed=seed,
    ))
    slope = sp.beta * (1 + params.rho / 2)
    # c e^{-b(n-2)} with c = c' e^{-2b} is c' e^{-b n}
    upper_threshold = math.log(distortion) - slope * n
    lower_threshold = math.log(LOWER_C2) - slope * n
    with np.errstate(invalid='ignore'):
        upper = (upper_gp >= upper_threshold).T
        lower = (lower_gp <= lower_threshold).T
    return BoxIndicators(upper=upper, lower=lower)


def box_count(params, sp, n, n_paths, dt, seed, **kwargs):
    indicators = box_count_indicators(params, sp, n, n_paths, dt, seed, **kwargs)
    report = BoxCountReport(
        n=n, beta=sp.beta, grid_size=indicators.upper.shape[1],
        upper_counts=indicators.upper.sum(axis=1), lower_counts=indicators.lower.sum(axis=1),
    )
    logger.info("n=%d: mean upper count %.4g, lower %.4g of %d", n, report.count_upper, report.count_lower,
                report.grid_size)
    return report


def fit_box_exponent(reports, params=None, sp=None):
    """Slope of log E[N_n] against n; ``target`` is 1 + (zeta beta - mu)(1 + rho/2) when params are given."""
    if len(reports) < 2:
        raise ParameterError("need counts at two or more levels")
    n = np.array([r.n for r in reports], dtype=float)
    counts = np.array([r.count_upper for r in reports])
    if np.any(counts <= 0):
        raise DegenerateFit("a level has zero mean count")
    if np.all(counts == counts[0]):
        raise DegenerateFit("mean counts do not change with n")
    slope, intercept = np.polyfit(n, np.log(counts), 1)
    target = covering_exponent(params, sp) if params is not None and sp is not None else math.nan
    return BoxFit(slope=float(slope), intercept=float(intercept), target=float(target))

"""Concentration of L~ under the weighted measure and the frequency of the good event."""
import logging
import math
from typing import NamedTuple

import numpy as np

from radial.events import GoodEventParams, good_event_indicator
from radial.tilted import TiltedPath, simulate_tilted_batch
from spectrum.exceptions import ParameterError

from .pool import gather, map_blocks

logger = logging.getLogger(__name__)


class ProfilePoint(NamedTuple):
    t: float
    mean: float
    stderr: float


class EventRate(NamedTuple):
    rate: float
    stderr: float
    n_paths: int


def _profile_block(path_indices, params, sp, t_values, p, ds, seed):
    _, l = simulate_tilted_batch(params, sp, ds, float(np.max(t_values)), seed, path_indices, record_s=t_values)
    t = np.asarray(t_values)[:, None]
    slope = sp.beta * (1 + params.rho / 2)
    return np.exp(p * np.abs(l - slope * t) / np.sqrt(t))


def concentration_profile(params, sp, t_values, p, n_paths, ds, seed, workers=None):
    """E*[exp(p |L~_t - beta(1 + rho/2) t| / sqrt t)] at each t; bounded in t for small p."""
    t_values = np.asarray(t_values, dtype=float)
    if np.any(t_values <= 0):
        raise ParameterError("profile times must be positive")
    samples = gather(map_blocks(
        _profile_block, n_paths, workers, params=params, sp=sp, t_values=t_values, p=p, ds=ds, seed=seed,
    ))
    stderr = samples.std(axis=-1, ddof=1) / math.sqrt(n_paths) if n_paths > 1 else np.zeros(len(t_values))
    return [ProfilePoint(float(t), float(m), float(e)) for t, m, e in zip(t_values, samples.mean(axis=-1), stderr)]


def _event_block(path_indices, params, sp, gep, t_max, ds, seed):
    q, l = simulate_tilted_batch(params, sp, ds, t_max, seed, path_indices)
    return np.array([
        good_event_indicator(TiltedPath(ds, q[:, j], l[:, j], None, seed, p, params, sp), gep, t_max).indicator
        for j, p in enumerate(path_indices)
    ])


def good_event_rate(params, sp, gep, t_max, n_paths, ds, seed, workers=None):
    if gep is None:
        gep = GoodEventParams.defaults()
    hits = gather(map_blocks(_event_block, n_paths, workers, params=params, sp=sp, gep=gep, t_max=t_max, ds=ds, seed=seed))
    rate = float(hits.mean())
    stderr = math.sqrt(rate * (1 - rate) / n_paths)
    logger.info("good event held on %d of %d paths up to s=%g", int(hits.sum()), n_paths, t_max)
    return EventRate(rate=rate, stderr=stderr, n_paths=n_paths)

"""
Numerical audit of the distortion inequalities along simulated curves.

    distance_bounds  (x - x_r)/(4x) dist(x, eta[0,t]) <= delta_t <= 4 dist(x, eta[0,t])
    koebe_harmonic   dist g'_t(x) / 4 <= pi omega_infinity <= 4 dist g'_t(x)
    time_sandwich    t~((s/a - C*) v 0) <= tau_s <= t~(s/a + C*)
"""
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from drivers.exceptions import NonHittingRegimeWarning
from drivers.simulate import simulate_driver
from loewner.exceptions import BranchFailure, NotReached, RightmostUndefined, SwallowedPoint
from loewner.observables import evolve_observables, harmonic_measure_infinity
from loewner.trace import distance_to_trace, trace_points
from radial.clock import time_sandwich

from .pool import gather, map_blocks

logger = logging.getLogger(__name__)

AUDIT_CHECKS = ('distance_bounds', 'koebe_harmonic', 'time_sandwich')
AUDIT_CSV_HEADER = ['check', 'samples', 'violations', 'fraction']


class AuditRow(NamedTuple):
    check: str
    samples: int
    violations: int

    @property
    def fraction(self):
        return self.violations / self.samples if self.samples else 0.0


@dataclass
class AuditReport:
    rows: list = field(default_factory=list)

    def __getitem__(self, check):
        for row in self.rows:
            if row.check == check:
                return row
        raise KeyError(check)

    @property
    def max_fraction(self):
        return max((row.fraction for row in self.rows), default=0.0)

    def csv_rows(self):
        return [[row.check, row.samples, row.violations, row.fraction] for row in self.rows]


def _sample_rows(n_rows, n_times):
    return np.unique(np.rint(np.linspace(0, n_rows - 1, n_times)).astype(int))


def _audit_path(params, dt, t_max, seed, path_index, trace_eps, n_times, s_values):
    """(samples, violations) for each check along one path."""
    counts = np.zeros((len(AUDIT_CHECKS), 2), dtype=int)
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', NonHittingRegimeWarning)
        driver = simulate_driver(params, dt, t_max, seed, path_index)
    try:
        trace = trace_points(driver, trace_eps)
    except BranchFailure:
        logger.warning("path %d: trace extraction failed, skipped", path_index)
        return counts
    obs = evolve_observables(driver, params.x)
    x, x_r = params.x, params.x_r
    dist = distance_to_trace(trace, x)
    for k in _sample_rows(len(obs.t), n_times):
        lower, upper = (x - x_r) / (4 * x) * dist[k], 4 * dist[k]
        counts[0] += (1, not lower <= obs.delta[k] <= upper)
        try:
            mapped_length = math.pi * harmonic_measure_infinity(obs, float(obs.t[k]))
        except (RightmostUndefined, SwallowedPoint):
            continue
        scale = dist[k] * math.exp(obs.log_gprime[k])
        counts[1] += (1, not scale / 4 <= mapped_length <= 4 * scale)
    for s in s_values:
        if s <= max(0.0, -math.log(x - x_r)):
            continue
        try:
            sandwich = time_sandwich(obs, s, trace)
        except NotReached:
            continue
        counts[2] += (1, not sandwich.holds)
    return counts


def _audit_block(path_indices, params, dt, t_max, seed, trace_eps, n_times, s_values):
    return np.stack([
        _audit_path(params, dt, t_max, seed, p, trace_eps, n_times, s_values) for p in path_indices
    ], axis=-1)


def distortion_audit(params, n_paths, dt, seed, t_max=1.0, trace_eps=1e-3, n_times=20, s_values=(0.5, 1.0, 1.5),
                     workers=None):
    counts = gather(map_blocks(
        _audit_block, n_paths, workers,
        params=params, dt=dt, t_max=t_max, seed=seed, trace_eps=trace_eps, n_times=n_times,
        s_values=tuple(s_values),
    )).sum(axis=-1)
    report = AuditReport(rows=[
        AuditRow(check, int(samples), int(violations)) for check, (samples, violations) in zip(AUDIT_CHECKS, counts)
    ])
    for row in report.rows:
        logger.info("%s: %d of %d samples violate", row.check, row.violations, row.samples)
    return report

"""
Run configuration for the ``slelab`` command.

A JSON file passed with ``--config`` supplies defaults and explicit flags
override it. The ``summary.json`` of an earlier run is accepted as well:
its ``config`` key holds the echo of that run's configuration.
"""
import json
import logging
import math
from dataclasses import asdict, dataclass
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np

from radial.events import GoodEventParams
from spectrum.params import SleParams, spectrum_params, spectrum_params_from_beta

from .exceptions import ConfigError

logger = logging.getLogger(__name__)

COMMANDS = ('spectrum', 'simulate', 'moment', 'qdiff', 'boxdim', 'audit')
MOMENT_METHODS = ('direct', 'tilted', 'exact', 'all')

DEFAULT_S = {
    'moment': [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
    'audit': [0.5, 1.0, 1.5],
}
DEFAULT_LEVELS = [3, 4, 5, 6, 7]
DEFAULT_T_MAX = {'simulate': 1.0, 'boxdim': 4.0, 'audit': 1.0}


@dataclass
class RunConfig:
    command: str
    kappa: float
    rho: float = 0.0
    x: float = 1.0
    x_r: float = 0.0
    zeta: Optional[float] = None
    beta: Optional[float] = None
    dt: float = 1e-3
    ds: float = 1e-3
    s_max: float = 0.0
    t_max: Optional[float] = None
    n_paths: int = 1000
    n_terms: Optional[int] = None
    n_grid: int = 101
    seed: int = 0
    workers: Optional[int] = None
    out_dir: str = 'out'
    method: str = 'exact'
    s: Optional[list] = None
    n: Optional[list] = None
    t: float = 1.0
    x0: Optional[float] = None
    trace_eps: Optional[float] = None
    u: Optional[float] = None
    c_const: Optional[float] = None
    lambda_boost: Optional[float] = None
    resolution_factor: Optional[float] = None

    def __str__(self):
        return f"{self.command} {self.params} seed={self.seed}"

    @cached_property
    def params(self):
        return SleParams(self.kappa, self.rho, self.x, self.x_r)

    @cached_property
    def spectrum(self):
        if self.beta is not None:
            return spectrum_params_from_beta(self.params, self.beta)
        return spectrum_params(self.params, self.zeta)

    @property
    def out_path(self):
        return Path(self.out_dir)

    @property
    def radial_times(self):
        return self.s if self.s is not None else DEFAULT_S.get(self.command, DEFAULT_S['moment'])

    @property
    def levels(self):
        return self.n if self.n is not None else DEFAULT_LEVELS

    @property
    def horizon(self):
        """t_max, falling back to a per-command default (None leaves it to the estimator)."""
        return self.t_max if self.t_max is not None else DEFAULT_T_MAX.get(self.command)

    @property
    def start(self):
        """Initial Q for the qdiff command."""
        return self.x0 if self.x0 is not None else self.params.q0

    @property
    def good_event(self):
        band = GoodEventParams.defaults()
        return GoodEventParams(
            u=self.u if self.u is not None else band.u,
            c_const=self.c_const if self.c_const is not None else band.c_const,
            lambda_boost=self.lambda_boost if self.lambda_boost is not None else band.lambda_boost,
        )

    @property
    def methods(self):
        if self.method == 'all':
            return ['exact', 'tilted', 'direct']
        return [self.method]

    @property
    def simulates_driver(self):
        """Whether the run integrates the Loewner chain on the dt grid."""
        if self.command == 'moment':
            return 'direct' in self.methods
        return self.command in ('simulate', 'boxdim', 'audit')

    def echo(self):
        """The configuration as written to summary.json; feeding it back reproduces the run."""
        return asdict(self)


def load_config_file(path):
    """Mapping of run options read from a JSON file (or a previous summary.json)."""
    try:
        with open(path, encoding='utf-8') as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError({'config': [f"no such file: {path}"]})
    except json.JSONDecodeError as exc:
        raise ConfigError({'config': [f"not valid JSON: {exc}"]})
    if isinstance(data, dict) and isinstance(data.get('config'), dict):
        data = data['config']
    if not isinstance(data, dict):
        raise ConfigError({'config': ["expected a JSON object"]})
    logger.info("read %d options from %s", len(data), path)
    return {key: value for key, value in data.items() if value is not None}


def json_safe(value):
    """Replace non-finite floats by None so summary.json stays strict JSON."""
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {key: json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(item) for item in value]
    return value

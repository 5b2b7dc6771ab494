"""
One-point moment E[g~'_s(x)^zeta ; t~(s) < infinity] and its decay in s.

Three estimators of the same quantity:

    direct   simulate the chain under P and read g' where delta first drops
             to (x - x_r) e^{-a s};
    tilted   average Q~_s^{-mu} under P* and multiply by
             ((x - x_r)/x)^mu e^{-a mu (1 + rho/2) s};
    exact    the same identity with E*[Q~_s^{-mu}] from the Jacobi expansion.
"""
import logging
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import optimize

from drivers.exceptions import NonHittingRegimeWarning
from drivers.simulate import simulate_driver_batch
from loewner.maps import slit_driver
from loewner.observables import delta_crossings
from qdiff.jacobi import exact_moment_inv_mu, q_diffusion_spec
from radial.tilted import simulate_tilted_batch, weight_exponent
from spectrum.conf import lab_settings
from spectrum.exceptions import ParameterError

from .exceptions import DegenerateFit, InsufficientSurvivors
from .pool import gather, map_blocks

logger = logging.getLogger(__name__)

METHODS = ('direct', 'tilted', 'exact')
MIN_FIT_POINTS = 5


@dataclass(frozen=True)
class MomentEstimate:
    s: float
    value: float
    stderr: float
    n_paths: int
    method: str

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"method must be one of {METHODS}, got {self.method!r}")

    def csv_row(self):
        return [self.s, self.value, self.stderr, self.method]


MOMENT_CSV_HEADER = ['s', 'value', 'stderr', 'method']


class ExponentFit(NamedTuple):
    slope: float
    intercept: float
    r2: float


def moment_prefactor(params, sp, s):
    """((x - x_r)/x)^mu e^{-a mu (1 + rho/2) s}."""
    return params.q0 ** sp.mu * np.exp(-params.a * weight_exponent(params, sp) * np.asarray(s, dtype=float))


def _radial_times(s_values):
    s_values = np.asarray(s_values, dtype=float)
    if s_values.ndim != 1 or len(s_values) == 0:
        raise ParameterError("need a nonempty list of radial times")
    if np.any(s_values < 0):
        raise ParameterError("radial times must be nonnegative")
    return s_values


def _direct_block(path_indices, params, sp, s_values, dt, t_max, seed):
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', NonHittingRegimeWarning)
        w, v = simulate_driver_batch(params, dt, t_max, seed, path_indices)
    log_levels = math.log(params.x - params.x_r) - params.a * np.asarray(s_values)[:, None]
    crossings = delta_crossings(w, dt, params.a, params.x, params.x_r, log_levels,
                                w_step=slit_driver(w, v, params.a, dt))
    values = np.where(crossings.reached, np.exp(sp.zeta * np.nan_to_num(crossings.log_gprime)), 0.0)
    return values, crossings.reached, crossings.censored


def _tilted_block(path_indices, params, sp, s_values, ds, seed):
    q, _ = simulate_tilted_batch(params, sp, ds, float(np.max(s_values)), seed, path_indices, record_s=s_values)
    return q ** -sp.mu


def _mean_and_stderr(samples):
    n = samples.shape[-1]
    mean = samples.mean(axis=-1)
    stderr = samples.std(axis=-1, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    return mean, stderr


def direct_moments(params, sp, s_values, n_paths, dt, seed, t_max=None, workers=None, min_survivors=None):
    s_values = _radial_times(s_values)
    if t_max is None:
        t_max = 8.0 * params.x ** 2
    if min_survivors is None:
        min_survivors = lab_settings.MIN_SURVIVORS
    values, reached, censored = gather(map_blocks(
        _direct_block, n_paths, workers,
        params=params, sp=sp, s_values=s_values, dt=dt, t_max=t_max, seed=seed,
    ))
    survivors = reached.sum(axis=-1)
    lost = censored.sum(axis=-1)
    if lost.any():
        logger.warning("%s of %d paths were censored at t_max=%g", lost.tolist(), n_paths, t_max)
    short = survivors < min_survivors
    if short.any():
        s_bad = float(s_values[np.argmax(short)])
        raise InsufficientSurvivors(
            f"only {int(survivors[np.argmax(short)])} of {n_paths} paths reached radial time {s_bad:g}"
        )
    mean, stderr = _mean_and_stderr(values)
    return [MomentEstimate(float(s), float(m), float(e), n_paths, 'direct') for s, m, e in zip(s_values, mean, stderr)]


def tilted_moments(params, sp, s_values, n_paths, ds, seed, workers=None):
    s_values = _radial_times(s_values)
    samples = gather(map_blocks(_tilted_block, n_paths, workers, params=params, sp=sp, s_values=s_values, ds=ds, seed=seed))
    mean, stderr = _mean_and_stderr(samples)
    factor = moment_prefactor(params, sp, s_values)
    return [
        MomentEstimate(float(s), float(f * m), float(f * e), n_paths, 'tilted')
        for s, f, m, e in zip(s_values, factor, mean, stderr)
    ]


def exact_moments(params, sp, s_values, n_terms=None):
    s_values = _radial_times(s_values)
    spec = q_diffusion_spec(params, sp.mu)
    out = []
    for s, factor in zip(s_values, moment_prefactor(params, sp, s_values)):
        inverse_moment = params.q0 ** -sp.mu if s == 0 else exact_moment_inv_mu(spec, s, params.q0, n_terms)
        out.append(MomentEstimate(float(s), float(factor * inverse_moment), 0.0, 0, 'exact'))
    return out


def moment_series(params, sp, s_values, method, n_paths=0, step=1e-3, seed=0, **kwargs):
    """MomentEstimates at each s; ``step`` is dt for direct and ds for tilted."""
    if method == 'direct':
        return direct_moments(params, sp, s_values, n_paths, step, seed, **kwargs)
    if method == 'tilted':
        return tilted_moments(params, sp, s_values, n_paths, step, seed, **kwargs)
    if method == 'exact':
        return exact_moments(params, sp, s_values, **kwargs)
    raise ParameterError(f"method must be one of {METHODS}, got {method!r}")


def one_point_moment(params, sp, s, n_paths, method, step, seed, **kwargs):
    return moment_series(params, sp, [s], method, n_paths, step, seed, **kwargs)[0]


def _transient_model(rate):
    def model(s, slope, intercept, weight):
        return intercept + slope * s + np.log1p(weight * np.exp(-rate * s))
    return model


def exponent_fit(series, transient_rate=None):
    """Weighted least squares of log(value) on s; weights value/stderr when every stderr is positive.

    With ``transient_rate`` the fit is log(value) = intercept + slope s + log(1 + b e^{-rate s}),
    so the leading correction to the pure exponential does not bend the slope and the
    intercept estimates the asymptotic prefactor.
    """
    if len(series) < MIN_FIT_POINTS:
        raise ParameterError(f"need at least {MIN_FIT_POINTS} estimates, got {len(series)}")
    s = np.array([e.s for e in series])
    values = np.array([e.value for e in series])
    stderr = np.array([e.stderr for e in series])
    if np.any(np.diff(s) <= 0):
        raise ParameterError("radial times must be increasing")
    if np.all(values == values[0]):
        raise DegenerateFit("all estimates are identical")
    if np.any(values <= 0):
        raise DegenerateFit("log-linear fit needs positive estimates")
    log_values = np.log(values)
    weights = values / stderr if np.all(stderr > 0) else None
    slope, intercept = np.polyfit(s, log_values, 1, w=weights)
    fitted = slope * s + intercept
    if transient_rate is not None:
        if not transient_rate > 0:
            raise ParameterError(f"transient_rate must be positive, got {transient_rate}")
        model = _transient_model(transient_rate)
        # keeps 1 + b e^{-rate s} positive on the fitted range
        floor = -0.99 * math.exp(transient_rate * s[0])
        try:
            (slope, intercept, weight), _ = optimize.curve_fit(
                model, s, log_values, p0=(slope, intercept, 0.0),
                sigma=None if weights is None else 1.0 / weights,
                bounds=([-np.inf, -np.inf, floor], [np.inf, np.inf, np.inf]),
            )
        except (RuntimeError, ValueError) as exc:
            raise DegenerateFit(f"transient fit did not converge: {exc}") from exc
        fitted = model(s, slope, intercept, weight)
    residual = log_values - fitted
    spread = np.sum((log_values - log_values.mean()) ** 2)
    r2 = 1.0 - np.sum(residual ** 2) / spread if spread > 0 else 1.0
    return ExponentFit(slope=float(slope), intercept=float(intercept), r2=float(r2))


def target_slope(params, sp):
    """-a mu (1 + rho/2): the decay rate of the moment in radial time."""
    return -params.a * weight_exponent(params, sp)


def transient_rate(params, sp):
    """1 - a + mu: the spectral gap of Q~ under P*, which sets the leading correction."""
    return q_diffusion_spec(params, sp.mu).rate

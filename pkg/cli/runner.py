"""
Experiment orchestration behind ``manage.py slelab``.

Each command writes ``<out_dir>/<command>.csv`` (``simulate`` writes a few
companion tables) and finishes with ``summary.json``: the config echo, the
derived parameters, command results, per-criterion pass/fail and wall time.
"""
import logging
import math
import time
from typing import NamedTuple, Optional

import numpy as np

from drivers.simulate import simulate_driver
from estimators.audit import AUDIT_CSV_HEADER, distortion_audit
from estimators.boxcount import BOXCOUNT_CSV_HEADER, box_count, fit_box_exponent
from estimators.exceptions import DegenerateFit
from estimators.moments import (
    MIN_FIT_POINTS, MOMENT_CSV_HEADER, exponent_fit, moment_series, target_slope, transient_rate,
)
from loewner.observables import evolve_observables
from loewner.trace import trace_points
from qdiff.exceptions import ParameterOutOfRange
from qdiff.jacobi import (
    convergence_rate, density_table, invariant_density, mean_transition, q_diffusion_spec, stationary_moment_inv_mu,
)
from radial.events import good_event_indicator, setbounds_holds
from radial.tilted import simulate_tilted
from spectrum.dimension import (
    beta_zero, beta_zero_star, covering_exponent, d_beta, d_star, dim_spectrum, one_point_prefactor, spectrum_bounds,
    spectrum_table,
)
from spectrum.exceptions import NumericalGuardError, ParameterError, SleLabError
from spectrum.serializers import SleParamsSerializer, SpectrumParamsSerializer

from .artifacts import RunArtifacts
from .config import json_safe

logger = logging.getLogger(__name__)

SPECTRUM_CSV_HEADER = ['beta', 'd', 'd_star']
QDIFF_CSV_HEADER = ['y', 'p']

SLOPE_TOLERANCE = {'exact': 0.01, 'tilted': 0.05, 'direct': 0.10}
PREFACTOR_TOLERANCE = {'exact': 0.10, 'tilted': 0.20, 'direct': 0.30}
BOX_EXPONENT_TOLERANCE = 0.15
AUDIT_MAX_FRACTION = 1e-3
STATIONARY_TIME = 10.0
STATIONARY_TOLERANCE = 1e-10
RATE_TOLERANCE = 0.05
RATE_TIMES = np.linspace(1.5, 4.0, 11)
DEFAULT_TRACE_EPS = 1e-3


class RunResult(NamedTuple):
    exit_code: int
    files: list
    summary: Optional[dict]
    error: Optional[str] = None


def criterion(value, target, tolerance, relative=False):
    error = abs(value - target)
    if relative:
        error /= abs(target)
    return {
        'value': value,
        'target': target,
        'tolerance': tolerance,
        'relative': relative,
        'passed': bool(error <= tolerance),
    }


def failed_criterion(reason):
    return {'passed': False, 'reason': reason}


def derived_parameters(params, sp):
    """Everything summary.json reports about (kappa, rho, zeta); guards that fire leave None."""
    derived = {**SleParamsSerializer(params).data, **SpectrumParamsSerializer(sp).data}
    derived['q0'] = params.q0
    derived['d'] = d_beta(params, sp.beta)
    derived['d_star'] = d_star(params, sp.beta)
    derived['covering_exponent'] = covering_exponent(params, sp)
    try:
        spec = q_diffusion_spec(params, sp.mu)
        derived.update(delta_plus=spec.delta_plus, delta_minus=spec.delta_minus, q_star=spec.q_star,
                       c_tilde=spec.c_tilde)
    except ParameterError:
        derived.update(delta_plus=None, delta_minus=None, q_star=None, c_tilde=None)
    try:
        derived['K'] = one_point_prefactor(params, sp)
    except NumericalGuardError:
        derived['K'] = None
    try:
        derived['beta_minus'], derived['beta_plus'] = spectrum_bounds(params)
    except NumericalGuardError:
        derived['beta_minus'] = derived['beta_plus'] = None
    b0 = beta_zero(params)
    derived['beta_zero'] = b0
    derived['d_beta0'] = d_beta(params, b0) if math.isfinite(b0) and b0 > 0 else None
    derived['beta_zero_star'] = beta_zero_star(params)
    return derived


def run_spectrum(config, artifacts):
    params, sp = config.params, config.spectrum
    rows = spectrum_table(params, config.n_grid)
    spectrum = dim_spectrum(params, sp.beta)
    artifacts.write_csv('spectrum.csv', SPECTRUM_CSV_HEADER, rows)
    return spectrum._asdict(), {}


def run_simulate(config, artifacts):
    params, sp = config.params, config.spectrum
    driver = simulate_driver(params, config.dt, config.horizon, config.seed)
    obs = evolve_observables(driver, params.x)
    artifacts.write_csv('simulate.csv', driver.csv_header, driver.csv_rows())
    artifacts.write_csv('observables.csv', obs.csv_header, obs.csv_rows())
    results = {'n_steps': driver.n_steps, 'swallow_time': obs.swallow_time}
    if config.s_max > 0:
        tp = simulate_tilted(params, sp, config.ds, config.s_max, config.seed)
        artifacts.write_csv('tilted.csv', tp.csv_header, tp.csv_rows())
        gep = config.good_event
        results['good_event'] = good_event_indicator(tp, gep, tp.s_max)._asdict()
        results['setbounds'] = setbounds_holds(tp, gep, tp.s_max)
    if config.trace_eps is not None:
        trace = trace_points(driver, config.trace_eps)
        artifacts.write_csv('trace.csv', trace.csv_header, trace.csv_rows())
        results['trace_points'] = len(trace)
    return results, {}


def _method_options(config, method):
    if method == 'exact':
        return 0.0, {'n_terms': config.n_terms}
    if method == 'tilted':
        return config.ds, {'workers': config.workers}
    return config.dt, {'workers': config.workers, 't_max': config.t_max}


def _moment_criteria(params, sp, method, series):
    if len(series) < MIN_FIT_POINTS:
        return {}, None
    try:
        rate = transient_rate(params, sp)
    except ParameterOutOfRange:
        rate = None
    try:
        fit = exponent_fit(series, transient_rate=rate)
    except DegenerateFit as exc:
        return {f'{method}_slope': failed_criterion(str(exc))}, None
    criteria = {
        f'{method}_slope': criterion(fit.slope, target_slope(params, sp), SLOPE_TOLERANCE[method], relative=True),
    }
    try:
        prefactor = one_point_prefactor(params, sp) * params.q0 ** sp.mu
    except NumericalGuardError as exc:
        criteria[f'{method}_prefactor'] = failed_criterion(str(exc))
    else:
        criteria[f'{method}_prefactor'] = criterion(
            math.exp(fit.intercept), prefactor, PREFACTOR_TOLERANCE[method], relative=True,
        )
    return criteria, fit._asdict()


def run_moment(config, artifacts):
    params, sp = config.params, config.spectrum
    rows, results, criteria = [], {}, {}
    for method in config.methods:
        step, options = _method_options(config, method)
        series = moment_series(params, sp, config.radial_times, method, config.n_paths, step, config.seed, **options)
        rows += [estimate.csv_row() for estimate in series]
        method_criteria, fit = _moment_criteria(params, sp, method, series)
        criteria.update(method_criteria)
        results[method] = {'fit': fit, 'n_paths': series[0].n_paths}
    artifacts.write_csv('moment.csv', MOMENT_CSV_HEADER, rows)
    results['target_slope'] = target_slope(params, sp)
    return results, criteria


def run_qdiff(config, artifacts):
    params, sp = config.params, config.spectrum
    spec = q_diffusion_spec(params, sp.mu)
    x0 = config.start
    table = density_table(spec, config.t, x0, config.n_grid, config.n_terms)
    artifacts.write_csv('qdiff.csv', QDIFF_CSV_HEADER, table)
    results = {
        't': config.t,
        'x0': x0,
        'mean': mean_transition(spec, config.t, x0),
        'stationary_mean': spec.q_star,
        'rate': spec.rate,
    }
    try:
        results['stationary_moment_inv_mu'] = stationary_moment_inv_mu(spec)
    except NumericalGuardError:
        results['stationary_moment_inv_mu'] = None
    criteria = {}
    if config.t >= STATIONARY_TIME:
        distance = float(np.max(np.abs(table[:, 1] - invariant_density(spec, table[:, 0]))))
        criteria['stationary_density'] = criterion(distance, 0.0, STATIONARY_TOLERANCE)
    rate = convergence_rate(spec, x0, RATE_TIMES, config.n_terms)
    results['fitted_rate'] = rate
    criteria['convergence_rate'] = criterion(rate, spec.rate, RATE_TOLERANCE, relative=True)
    return results, criteria


def run_boxdim(config, artifacts):
    params, sp = config.params, config.spectrum
    reports = [
        box_count(params, sp, n, config.n_paths, config.dt, config.seed, t_max=config.horizon, workers=config.workers,
                  resolution_factor=config.resolution_factor)
        for n in config.levels
    ]
    artifacts.write_csv('boxdim.csv', BOXCOUNT_CSV_HEADER, [report.csv_row() for report in reports])
    results, criteria = {'beta': sp.beta}, {}
    if len(reports) >= 2:
        try:
            fit = fit_box_exponent(reports, params, sp)
        except DegenerateFit as exc:
            criteria['box_exponent'] = failed_criterion(str(exc))
        else:
            results['fit'] = fit._asdict()
            criteria['box_exponent'] = criterion(fit.slope, fit.target, BOX_EXPONENT_TOLERANCE)
    return results, criteria


def run_audit(config, artifacts):
    report = distortion_audit(
        config.params, config.n_paths, config.dt, config.seed, t_max=config.horizon,
        trace_eps=config.trace_eps if config.trace_eps is not None else DEFAULT_TRACE_EPS,
        s_values=config.radial_times, workers=config.workers,
    )
    artifacts.write_csv('audit.csv', AUDIT_CSV_HEADER, report.csv_rows())
    criteria = {
        row.check: criterion(row.fraction, 0.0, AUDIT_MAX_FRACTION) for row in report.rows if row.samples
    }
    return {'max_fraction': report.max_fraction}, criteria


HANDLERS = {
    'spectrum': run_spectrum,
    'simulate': run_simulate,
    'moment': run_moment,
    'qdiff': run_qdiff,
    'boxdim': run_boxdim,
    'audit': run_audit,
}


def run(config):
    """Run one command; lab errors become exit codes and leave no files behind."""
    started = time.perf_counter()
    artifacts = RunArtifacts(config.out_path)
    logger.info("starting %s", config)
    try:
        results, criteria = HANDLERS[config.command](config, artifacts)
        summary = json_safe({
            'command': config.command,
            'config': config.echo(),
            'derived': derived_parameters(config.params, config.spectrum),
            'results': results,
            'criteria': criteria,
            'wall_time': time.perf_counter() - started,
        })
        artifacts.write_summary(summary)
    except SleLabError as exc:
        artifacts.discard()
        logger.error("%s failed: %s", config.command, exc)
        return RunResult(exc.exit_code, [], None, f"{type(exc).__name__}: {exc}")
    except Exception:
        artifacts.discard()
        raise
    failed = [name for name, outcome in criteria.items() if not outcome['passed']]
    if failed:
        logger.warning("criteria not met: %s", ', '.join(failed))
    logger.info("%s finished in %.2fs", config.command, summary['wall_time'])
    return RunResult(0, list(artifacts.written), summary)

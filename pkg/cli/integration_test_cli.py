import csv
import json
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from qdiff.jacobi import invariant_density, q_diffusion_spec
from spectrum.params import SleParams

WORKED = ('--kappa', '2', '--rho', '-1.5', '--zeta', '0')
HITTING = ('--kappa', '3', '--rho', '-1', '--zeta', '0')


class SlelabCommandTestCase(SimpleTestCase):
    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.root = Path(tmp.name)

    def slelab(self, command, *args, out='run'):
        out_dir = self.root / out
        call_command('slelab', command, *args, '--out-dir', str(out_dir), stdout=StringIO(), stderr=StringIO())
        return out_dir

    def read_csv(self, path):
        with open(path, newline='') as fh:
            return list(csv.reader(fh))

    def read_summary(self, out_dir):
        return json.loads((out_dir / 'summary.json').read_text())

    # Test the worked example through the spectrum command
    def test_spectrum_worked_example(self):
        out_dir = self.slelab('spectrum', *WORKED)
        summary = self.read_summary(out_dir)
        derived = summary['derived']
        self.assertAlmostEqual(derived['mu'], 1.5, places=12)
        self.assertAlmostEqual(derived['beta'], 4 / 3, places=12)
        self.assertAlmostEqual(derived['d_beta0'], 0.625, places=12)
        self.assertAlmostEqual(derived['K'], 1.697653, places=6)
        self.assertEqual(summary['config']['command'], 'spectrum')
        self.assertGreaterEqual(summary['wall_time'], 0)

        rows = self.read_csv(out_dir / 'spectrum.csv')
        self.assertEqual(rows[0], ['beta', 'd', 'd_star'])
        self.assertEqual(len(rows), 1 + 101)
        # the grid spans [beta_minus, beta_plus], where d vanishes
        self.assertAlmostEqual(float(rows[1][1]), 0.0, places=8)
        self.assertAlmostEqual(float(rows[-1][1]), 0.0, places=8)

    # Test that the qdiff table at t=50 is the invariant density
    def test_qdiff_stationary_limit(self):
        out_dir = self.slelab('qdiff', *WORKED, '--t', '50', '--n-terms', '64')
        table = np.array(self.read_csv(out_dir / 'qdiff.csv')[1:], dtype=float)
        spec = q_diffusion_spec(SleParams(2.0, -1.5), 1.5)
        np.testing.assert_allclose(table[:, 1], invariant_density(spec, table[:, 0]), rtol=0, atol=1e-10)
        criteria = self.read_summary(out_dir)['criteria']
        self.assertTrue(criteria['stationary_density']['passed'])
        self.assertIn('convergence_rate', criteria)

    # Test byte-identical CSVs across reruns and worker counts
    def test_determinism(self):
        args = (*WORKED, '--method', 'tilted', '--s', '0.5', '1.0', '--n-paths', '64', '--seed', '7')
        first = self.slelab('moment', *args, out='first')
        second = self.slelab('moment', *args, out='second')
        parallel = self.slelab('moment', *args, '--workers', '2', out='parallel')
        content = (first / 'moment.csv').read_bytes()
        self.assertEqual(content, (second / 'moment.csv').read_bytes())
        self.assertEqual(content, (parallel / 'moment.csv').read_bytes())
        self.assertEqual(self.read_csv(first / 'moment.csv')[0], ['s', 'value', 'stderr', 'method'])

    # Test that the config echo in summary.json reproduces the run
    def test_summary_echo_reproduces_run(self):
        first = self.slelab('moment', *WORKED, '--method', 'exact', out='first')
        second = self.slelab('moment', '--config', str(first / 'summary.json'), out='second')
        self.assertEqual((first / 'moment.csv').read_bytes(), (second / 'moment.csv').read_bytes())
        summary = self.read_summary(second)
        self.assertEqual(summary['config']['kappa'], 2.0)
        self.assertIn('exact_slope', summary['criteria'])

    # Test that the exact series meets the slope and prefactor criteria over s = 1..8
    def test_exact_moment_criteria_pass(self):
        summary = self.read_summary(self.slelab('moment', *WORKED, '--method', 'exact'))
        self.assertTrue(summary['criteria']['exact_slope']['passed'])
        self.assertTrue(summary['criteria']['exact_prefactor']['passed'])

    # Test that flags override values from a config file
    def test_flags_override_config_file(self):
        path = self.root / 'run.json'
        path.write_text(json.dumps({'kappa': 2, 'rho': -1.5, 'zeta': 0.5, 'n_grid': 11}))
        out_dir = self.slelab('spectrum', '--config', str(path), '--zeta', '0')
        summary = self.read_summary(out_dir)
        self.assertEqual(summary['config']['zeta'], 0.0)
        self.assertEqual(summary['config']['n_grid'], 11)
        self.assertEqual(len(self.read_csv(out_dir / 'spectrum.csv')), 12)

    # Test exit code 2 with field names on invalid configuration
    def test_validation_error(self):
        with self.assertRaises(CommandError) as ctx:
            self.slelab('spectrum', *WORKED, '--beta', '1.0')
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertIn('zeta', str(ctx.exception))

        with self.assertRaises(CommandError) as ctx:
            self.slelab('boxdim', *HITTING, '--n', '5', '--dt', '1e-3')
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertIn('n:', str(ctx.exception))
        self.assertFalse((self.root / 'run').exists())

    # Test exit code 3 on a numerical guard and that no partial outputs remain
    def test_numerical_guard(self):
        with self.assertRaises(CommandError) as ctx:
            self.slelab('moment', *WORKED, '--method', 'direct', '--s', '1.0', '--n-paths', '20', '--dt', '5e-3',
                        '--t-max', '2')
        self.assertEqual(ctx.exception.returncode, 3)
        self.assertIn('InsufficientSurvivors', str(ctx.exception))
        out_dir = self.root / 'run'
        self.assertEqual(list(out_dir.glob('*')) if out_dir.exists() else [], [])

    # Test the driver, observable, tilted and trace tables of simulate
    def test_simulate_tables(self):
        out_dir = self.slelab('simulate', *WORKED, '--dt', '1e-3', '--t-max', '0.3', '--seed', '4', '--s-max', '0.5',
                              '--trace-eps', '1e-3')
        for name in ('simulate.csv', 'observables.csv', 'tilted.csv', 'trace.csv', 'summary.json'):
            self.assertTrue((out_dir / name).exists(), name)
        driver = self.read_csv(out_dir / 'simulate.csv')
        self.assertEqual(driver[0], ['t', 'w', 'v'])
        self.assertEqual(len(driver), 1 + 301)
        self.assertEqual(self.read_csv(out_dir / 'observables.csv')[0], ['t', 'f', 'log_gprime', 'v', 'delta', 'q'])
        self.assertEqual(self.read_csv(out_dir / 'tilted.csv')[0], ['s', 'q', 'l', 'm_weight'])
        self.assertEqual(self.read_csv(out_dir / 'trace.csv')[0], ['re', 'im'])
        results = self.read_summary(out_dir)['results']
        self.assertEqual(results['n_steps'], 300)
        self.assertIn(results['good_event']['indicator'], (0, 1))

    # Test the audit table
    def test_audit(self):
        out_dir = self.slelab('audit', *HITTING, '--n-paths', '2', '--dt', '1e-3', '--t-max', '0.2', '--s', '0.5')
        rows = self.read_csv(out_dir / 'audit.csv')
        self.assertEqual(rows[0], ['check', 'samples', 'violations', 'fraction'])
        self.assertEqual([row[0] for row in rows[1:]], ['distance_bounds', 'koebe_harmonic', 'time_sandwich'])

    # Test one box-count row per level and a recorded exponent criterion
    def test_boxdim(self):
        out_dir = self.slelab('boxdim', *HITTING, '--n', '2', '3', '--n-paths', '4', '--dt', '1e-4', '--t-max',
                              '0.05', '--resolution-factor', '1')
        rows = self.read_csv(out_dir / 'boxdim.csv')
        self.assertEqual(rows[0], ['n', 'count_upper', 'count_lower', 'grid_size'])
        self.assertEqual([row[0] for row in rows[1:]], ['2', '3'])
        self.assertIn('box_exponent', self.read_summary(out_dir)['criteria'])

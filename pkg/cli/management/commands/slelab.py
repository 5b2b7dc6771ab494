import argparse
import logging

from django.core.management.base import BaseCommand, CommandError

from cli.config import COMMANDS, MOMENT_METHODS, load_config_file
from cli.exceptions import ConfigError, format_errors
from cli.runner import run
from cli.serializers import RunConfigSerializer

LAB_APPS = ('spectrum', 'drivers', 'loewner', 'radial', 'qdiff', 'estimators', 'cli')

RUN_FLAGS = (
    ('--kappa', 'SLE parameter kappa > 0'),
    ('--rho', 'force-point weight, > -2'),
    ('--x', 'tracked boundary point'),
    ('--x-r', 'force point, 0 <= x_r < x'),
    ('--zeta', 'derivative exponent (give zeta or beta)'),
    ('--beta', 'multifractal exponent (give zeta or beta)'),
    ('--dt', 'capacity time step of the Loewner chain'),
    ('--ds', 'radial time step of the Q~ diffusion'),
    ('--s-max', 'radial horizon of the tilted path (simulate)'),
    ('--t-max', 'capacity horizon of the Loewner chain'),
    ('--n-paths', 'number of Monte Carlo paths'),
    ('--n-terms', 'Jacobi expansion terms'),
    ('--n-grid', 'rows of the spectrum and density tables'),
    ('--seed', '64-bit seed of the counter-based streams'),
    ('--workers', 'worker processes (SLE_LAB_THREADS overrides)'),
    ('--out-dir', 'directory for CSV and summary.json'),
    ('--method', f"moment estimator: {', '.join(MOMENT_METHODS)}"),
    ('--t', 'transition time (qdiff)'),
    ('--x0', 'initial Q in (0, 1] (qdiff; default (x - x_r)/x)'),
    ('--trace-eps', 'tip offset for trace extraction'),
    ('--u', 'good-event band width'),
    ('--c-const', 'good-event band constant'),
    ('--lambda-boost', 'good-event band enlargement'),
    ('--resolution-factor', 'box-count guard: e^-n >= factor sqrt(dt)'),
)
LIST_FLAGS = (
    ('--s', 'radial times (moment, audit)'),
    ('--n', 'box-count levels (boxdim)'),
)


class Command(BaseCommand):
    help = "Run an SLE_kappa(rho) experiment and write CSV tables plus summary.json."

    requires_system_checks = []

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(dest='command', required=True, metavar='{%s}' % ','.join(COMMANDS))
        for name in COMMANDS:
            sub = subparsers.add_parser(name, help=f"{name} experiment")
            sub.add_argument('--config', help='JSON file of defaults (a previous summary.json works)')
            for flag, text in RUN_FLAGS:
                sub.add_argument(flag, default=argparse.SUPPRESS, help=text)
            for flag, text in LIST_FLAGS:
                sub.add_argument(flag, nargs='+', default=argparse.SUPPRESS, help=text)

    def handle(self, *args, **options):
        if options['verbosity'] > 1:
            for app in LAB_APPS:
                logging.getLogger(app).setLevel(logging.DEBUG)

        data = {}
        if options.get('config'):
            try:
                data.update(load_config_file(options['config']))
            except ConfigError as exc:
                self._reject(exc.errors)
        for flag, _ in RUN_FLAGS + LIST_FLAGS:
            dest = flag.lstrip('-').replace('-', '_')
            if dest in options:
                data[dest] = options[dest]
        data['command'] = options['command']

        serializer = RunConfigSerializer(data=data)
        if not serializer.is_valid():
            self._reject(serializer.errors)
        config = serializer.save()

        result = run(config)
        if result.exit_code:
            raise CommandError(result.error, returncode=result.exit_code)
        for path in result.files:
            self.stdout.write(str(path))
        failed = [name for name, outcome in result.summary['criteria'].items() if not outcome['passed']]
        if failed:
            self.stdout.write(self.style.WARNING(f"criteria not met: {', '.join(failed)}"))
        else:
            self.stdout.write(self.style.SUCCESS(f"{config.command} finished"))

    def _reject(self, errors):
        lines = format_errors(errors)
        for line in lines:
            self.stderr.write(line)
        raise CommandError('invalid configuration: ' + '; '.join(lines), returncode=2)

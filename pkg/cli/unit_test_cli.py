import json
import math

import numpy as np
import pytest

from spectrum.conf import lab_settings
from spectrum.serializers import SleParamsSerializer

from .artifacts import RunArtifacts, format_cell
from .config import DEFAULT_LEVELS, RunConfig, json_safe, load_config_file
from .exceptions import ConfigError, format_errors
from .runner import criterion, derived_parameters
from .serializers import RunConfigSerializer


def worked_data(**overrides):
    data = {'command': 'moment', 'kappa': 2, 'rho': -1.5, 'zeta': 0}
    data.update(overrides)
    return data


class TestRunConfigSerializer:
    def test_defaults(self):
        """Test that a minimal config validates and fills in defaults."""
        serializer = RunConfigSerializer(data=worked_data())
        assert serializer.is_valid(), serializer.errors
        config = serializer.save()
        assert isinstance(config, RunConfig)
        assert config.x == 1.0
        assert config.x_r == 0.0
        assert config.beta is None
        assert config.out_dir == str(lab_settings.OUT_DIR)
        assert config.spectrum.mu == pytest.approx(1.5)

    def test_exactly_one_exponent(self):
        """Test that zeta and beta together, or neither, are refused."""
        both = RunConfigSerializer(data=worked_data(beta=1.0))
        assert not both.is_valid()
        assert 'zeta' in both.errors
        neither = RunConfigSerializer(data={'command': 'spectrum', 'kappa': 2})
        assert not neither.is_valid()
        assert 'zeta' in neither.errors

    def test_beta_instead_of_zeta(self):
        """Test that beta alone is enough."""
        serializer = RunConfigSerializer(data={'command': 'spectrum', 'kappa': 2, 'rho': -1.5, 'beta': 4 / 3})
        assert serializer.is_valid(), serializer.errors
        assert serializer.save().spectrum.zeta == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize('field_name, value', [
        ('kappa', -1),
        ('rho', -2),
        ('zeta', -1),
        ('dt', 0.1),
        ('ds', 1e-2),
        ('x0', 1.5),
        ('trace_eps', 0.5),
        ('seed', 2 ** 64),
        ('n_paths', 0),
        ('method', 'bootstrap'),
        ('command', 'plot'),
    ])
    def test_field_errors(self, field_name, value):
        """Test that each rejected value is reported under its own field name."""
        serializer = RunConfigSerializer(data=worked_data(**{field_name: value}))
        assert not serializer.is_valid()
        assert field_name in serializer.errors

    def test_point_order(self):
        """Test x > x_r."""
        serializer = RunConfigSerializer(data=worked_data(x=1.0, x_r=2.0))
        assert not serializer.is_valid()
        assert 'x' in serializer.errors

    def test_sle_parameters_validated_together(self):
        """Test that kappa and rho errors from the parameter serializer surface side by side."""
        serializer = RunConfigSerializer(data=worked_data(kappa=-1, rho=-3))
        assert not serializer.is_valid()
        assert 'kappa' in serializer.errors
        assert 'rho' in serializer.errors

    def test_sle_parameters_built_by_parameter_serializer(self, monkeypatch):
        """Test that the run config hands kappa, rho, x and x_r to the parameter serializer."""
        seen = []
        original = SleParamsSerializer.create

        def create(self, validated_data):
            seen.append(dict(validated_data))
            return original(self, validated_data)

        monkeypatch.setattr(SleParamsSerializer, 'create', create)
        serializer = RunConfigSerializer(data=worked_data(x=2.0, x_r=0.5))
        assert serializer.is_valid(), serializer.errors
        assert seen == [{'kappa': 2.0, 'rho': -1.5, 'x': 2.0, 'x_r': 0.5}]

    def test_radial_times_increasing(self):
        """Test that radial times must be sorted and distinct."""
        serializer = RunConfigSerializer(data=worked_data(s=[2.0, 1.0]))
        assert not serializer.is_valid()
        assert 's' in serializer.errors

    def test_box_levels_checked_at_parse_time(self):
        """Test that e^-n < 10 sqrt(dt) is caught before anything runs."""
        serializer = RunConfigSerializer(data=worked_data(command='boxdim', n=[5], dt=1e-3))
        assert not serializer.is_valid()
        assert 'n' in serializer.errors
        ok = RunConfigSerializer(data=worked_data(command='boxdim', n=[2, 3], dt=1e-6))
        assert ok.is_valid(), ok.errors

    def test_echo_round_trip(self):
        """Test that the echoed config validates back to the same RunConfig."""
        config = RunConfigSerializer(data=worked_data(s=[1.0, 2.0], seed=2 ** 63, workers=2))
        assert config.is_valid(), config.errors
        original = config.save()
        again = RunConfigSerializer(data=json.loads(json.dumps(original.echo())))
        assert again.is_valid(), again.errors
        assert again.save() == original


class TestRunConfig:
    def test_command_defaults(self):
        """Test per-command radial times, levels and horizons."""
        moment = RunConfig(command='moment', kappa=2.0, zeta=0.0)
        audit = RunConfig(command='audit', kappa=2.0, zeta=0.0)
        assert moment.radial_times == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]
        assert audit.radial_times == [0.5, 1.0, 1.5]
        assert moment.levels == DEFAULT_LEVELS
        assert moment.horizon is None
        assert audit.horizon == 1.0

    def test_methods(self):
        """Test that method 'all' expands and only direct runs simulate the chain."""
        config = RunConfig(command='moment', kappa=2.0, zeta=0.0, method='all')
        assert config.methods == ['exact', 'tilted', 'direct']
        assert config.simulates_driver
        assert not RunConfig(command='moment', kappa=2.0, zeta=0.0, method='tilted').simulates_driver
        assert RunConfig(command='audit', kappa=2.0, zeta=0.0).simulates_driver

    def test_qdiff_start(self):
        """Test that the qdiff start defaults to (x - x_r)/x."""
        assert RunConfig(command='qdiff', kappa=2.0, zeta=0.0, x=2.0, x_r=0.5).start == pytest.approx(0.75)
        assert RunConfig(command='qdiff', kappa=2.0, zeta=0.0, x0=0.3).start == 0.3

    def test_good_event_overrides(self):
        """Test that unset band constants fall back to the lab defaults."""
        gep = RunConfig(command='simulate', kappa=2.0, zeta=0.0, u=2.0).good_event
        assert gep.u == 2.0
        assert gep.c_const == 1.0
        assert gep.lambda_boost == 4.0


class TestConfigFiles:
    def test_plain_file(self, tmp_path):
        """Test that null entries in a config file are dropped."""
        path = tmp_path / 'run.json'
        path.write_text(json.dumps({'kappa': 2, 'zeta': None, 'beta': 1.0}))
        assert load_config_file(path) == {'kappa': 2, 'beta': 1.0}

    def test_summary_file(self, tmp_path):
        """Test that a previous summary.json contributes its config echo."""
        path = tmp_path / 'summary.json'
        path.write_text(json.dumps({'command': 'spectrum', 'config': {'kappa': 3, 'rho': -1}, 'derived': {}}))
        assert load_config_file(path) == {'kappa': 3, 'rho': -1}

    def test_missing_file(self, tmp_path):
        """Test a ConfigError keyed by 'config'."""
        with pytest.raises(ConfigError) as exc_info:
            load_config_file(tmp_path / 'nope.json')
        assert list(exc_info.value.errors) == ['config']
        assert exc_info.value.exit_code == 2

    def test_not_an_object(self, tmp_path):
        """Test that a JSON list is refused."""
        path = tmp_path / 'run.json'
        path.write_text('[1, 2]')
        with pytest.raises(ConfigError):
            load_config_file(path)


class TestArtifacts:
    def test_format_cell(self):
        """Test 17 significant digits for floats and plain integers."""
        assert format_cell(0.1) == '0.10000000000000001'
        assert float(format_cell(1 / 3)) == 1 / 3
        assert format_cell(np.float64(2.5)) == '2.5'
        assert format_cell(3) == '3'
        assert format_cell(np.int64(7)) == '7'
        assert format_cell('exact') == 'exact'
        assert format_cell(None) == ''

    def test_write_and_discard(self, tmp_path):
        """Test that discard removes every file the run wrote."""
        artifacts = RunArtifacts(tmp_path / 'run')
        csv_path = artifacts.write_csv('moment.csv', ['s', 'value'], [[1.0, 0.5], [2.0, 0.25]])
        summary_path = artifacts.write_summary({'wall_time': 0.1, 'beta_plus': math.inf})
        assert csv_path.read_text() == 's,value\n1,0.5\n2,0.25\n'
        assert json.loads(summary_path.read_text())['beta_plus'] is None
        artifacts.discard()
        assert not csv_path.exists()
        assert not summary_path.exists()
        assert artifacts.written == []

    def test_json_safe(self):
        """Test that numpy scalars and non-finite values become plain JSON values."""
        assert json_safe({'a': np.float64(1.5), 'b': [np.inf, np.int64(2)], 'c': (math.nan,)}) == {
            'a': 1.5, 'b': [None, 2], 'c': [None],
        }

    def test_format_errors(self):
        """Test field: message lines, including nested list errors."""
        lines = format_errors({'zeta': ['Supply exactly one of zeta and beta.'], 's': {0: ['bad value']}})
        assert lines == ['zeta: Supply exactly one of zeta and beta.', 's.0: bad value']


class TestDerivedParameters:
    def test_worked_example(self, worked_params, worked_spectrum):
        """Test the summary block for kappa=2, rho=-1.5, zeta=0."""
        derived = derived_parameters(worked_params, worked_spectrum)
        assert derived['a'] == pytest.approx(1.0)
        assert derived['mu'] == pytest.approx(1.5)
        assert derived['beta'] == pytest.approx(4 / 3)
        assert derived['d_beta0'] == pytest.approx(0.625)
        assert derived['K'] == pytest.approx(1.697653, rel=1e-6)
        assert derived['c_tilde'] == pytest.approx(0.848826, rel=1e-6)
        assert derived['delta_plus'] == pytest.approx(5.0)
        assert derived['delta_minus'] == pytest.approx(1.0)
        assert derived['beta_minus'] < derived['beta_zero'] < derived['beta_plus']

    def test_criterion(self):
        """Test absolute and relative tolerances."""
        assert criterion(1.005, 1.0, 0.01, relative=True)['passed']
        assert not criterion(0.2, 0.0, 0.1)['passed']

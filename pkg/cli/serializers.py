from rest_framework import serializers

from drivers.simulate import MAX_DT
from estimators.boxcount import MAX_LEVEL, check_level
from loewner.trace import MAX_TRACE_EPS, MIN_TRACE_EPS
from radial.tilted import MAX_DS
from spectrum.conf import lab_settings
from spectrum.exceptions import ParameterError
from spectrum.params import spectrum_params, spectrum_params_from_beta
from spectrum.serializers import SleParamsSerializer

from .config import COMMANDS, DEFAULT_LEVELS, MOMENT_METHODS, RunConfig

SEED_MAX = 2 ** 64 - 1
SLE_PARAM_FIELDS = ('kappa', 'rho', 'x', 'x_r')


class RunConfigSerializer(serializers.Serializer):
    command = serializers.ChoiceField(choices=COMMANDS)
    kappa = serializers.FloatField()
    rho = serializers.FloatField(default=0.0)
    x = serializers.FloatField(default=1.0)
    x_r = serializers.FloatField(default=0.0, min_value=0.0)
    zeta = serializers.FloatField(default=None, allow_null=True)
    beta = serializers.FloatField(default=None, allow_null=True)
    dt = serializers.FloatField(default=1e-3)
    ds = serializers.FloatField(default=1e-3)
    s_max = serializers.FloatField(default=0.0, min_value=0.0)
    t_max = serializers.FloatField(default=None, allow_null=True)
    n_paths = serializers.IntegerField(default=1000, min_value=1)
    n_terms = serializers.IntegerField(default=None, allow_null=True, min_value=1)
    n_grid = serializers.IntegerField(default=101, min_value=2)
    seed = serializers.IntegerField(default=0, min_value=0, max_value=SEED_MAX)
    workers = serializers.IntegerField(default=None, allow_null=True, min_value=1)
    out_dir = serializers.CharField(default=None, allow_null=True)
    method = serializers.ChoiceField(choices=MOMENT_METHODS, default='exact')
    s = serializers.ListField(
        child=serializers.FloatField(min_value=0.0), default=None, allow_null=True, allow_empty=False,
    )
    n = serializers.ListField(
        child=serializers.IntegerField(min_value=1, max_value=MAX_LEVEL), default=None, allow_null=True,
        allow_empty=False,
    )
    t = serializers.FloatField(default=1.0)
    x0 = serializers.FloatField(default=None, allow_null=True)
    trace_eps = serializers.FloatField(default=None, allow_null=True)
    u = serializers.FloatField(default=None, allow_null=True)
    c_const = serializers.FloatField(default=None, allow_null=True)
    lambda_boost = serializers.FloatField(default=None, allow_null=True)
    resolution_factor = serializers.FloatField(default=None, allow_null=True)

    def validate_dt(self, value):
        if not 0 < value <= MAX_DT:
            raise serializers.ValidationError(f"dt must lie in (0, {MAX_DT:g}]")
        return value

    def validate_ds(self, value):
        if not 0 < value <= MAX_DS:
            raise serializers.ValidationError(f"ds must lie in (0, {MAX_DS:g}]")
        return value

    def validate_t_max(self, value):
        if value is not None and value <= 0:
            raise serializers.ValidationError("t_max must be positive")
        return value

    def validate_t(self, value):
        if value <= 0:
            raise serializers.ValidationError("t must be positive")
        return value

    def validate_x0(self, value):
        if value is not None and not 0 < value <= 1:
            raise serializers.ValidationError("x0 must lie in (0, 1]")
        return value

    def validate_trace_eps(self, value):
        if value is not None and not MIN_TRACE_EPS < value < MAX_TRACE_EPS:
            raise serializers.ValidationError(f"trace_eps must lie in ({MIN_TRACE_EPS:g}, {MAX_TRACE_EPS:g})")
        return value

    def validate_u(self, value):
        if value is not None and value <= 0:
            raise serializers.ValidationError("u must be positive")
        return value

    def validate_resolution_factor(self, value):
        if value is not None and value <= 0:
            raise serializers.ValidationError("resolution_factor must be positive")
        return value

    def validate_s(self, value):
        if value is not None and sorted(set(value)) != value:
            raise serializers.ValidationError("radial times must be distinct and increasing")
        return value

    def validate_n(self, value):
        if value is not None and sorted(set(value)) != value:
            raise serializers.ValidationError("levels must be distinct and increasing")
        return value

    def validate(self, data):
        if (data['zeta'] is None) == (data['beta'] is None):
            raise serializers.ValidationError({'zeta': "Supply exactly one of zeta and beta."})
        params_serializer = SleParamsSerializer(data={key: data[key] for key in SLE_PARAM_FIELDS})
        if not params_serializer.is_valid():
            raise serializers.ValidationError(params_serializer.errors)
        params = params_serializer.save()

        field_name = 'beta' if data['beta'] is not None else 'zeta'
        try:
            if field_name == 'beta':
                spectrum_params_from_beta(params, data['beta'])
            else:
                spectrum_params(params, data['zeta'])
        except ParameterError as exc:
            raise serializers.ValidationError({field_name: str(exc)})

        if data['command'] == 'boxdim':
            for level in data['n'] or DEFAULT_LEVELS:
                try:
                    check_level(level, data['dt'], data['resolution_factor'])
                except ParameterError as exc:
                    raise serializers.ValidationError({'n': str(exc)})

        if data['out_dir'] is None:
            data['out_dir'] = str(lab_settings.OUT_DIR)
        return data

    def create(self, validated_data):
        return RunConfig(**validated_data)

from rest_framework import serializers

from .exceptions import ParameterError
from .params import SleParams


class SleParamsSerializer(serializers.Serializer):
    kappa = serializers.FloatField()
    rho = serializers.FloatField(default=0.0)
    x = serializers.FloatField(default=1.0)
    x_r = serializers.FloatField(default=0.0, min_value=0.0)
    a = serializers.FloatField(read_only=True)
    mu_c = serializers.FloatField(read_only=True)
    bessel_dimension = serializers.FloatField(read_only=True)

    def validate_kappa(self, value):
        if value <= 0:
            raise serializers.ValidationError("kappa must be positive")
        return value

    def validate_rho(self, value):
        if value <= -2:
            raise serializers.ValidationError("rho must exceed -2")
        return value

    def validate(self, data):
        if data['x'] <= data['x_r']:
            raise serializers.ValidationError({'x': "x must lie to the right of x_r"})
        try:
            SleParams(**data)
        except ParameterError as exc:
            raise serializers.ValidationError({'kappa': str(exc)})
        return data

    def create(self, validated_data):
        return SleParams(**validated_data)


class SpectrumParamsSerializer(serializers.Serializer):
    mu_c = serializers.FloatField(read_only=True)
    zeta = serializers.FloatField(read_only=True)
    mu = serializers.FloatField(read_only=True)
    beta = serializers.FloatField(read_only=True)

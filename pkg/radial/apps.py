from django.apps import AppConfig


class RadialConfig(AppConfig):
    name = 'radial'
    verbose_name = 'Radial parametrization and weighted paths'

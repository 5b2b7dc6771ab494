from django.apps import AppConfig


class LoewnerConfig(AppConfig):
    name = 'loewner'
    verbose_name = 'Loewner chains and boundary observables'

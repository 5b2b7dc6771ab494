"""
Numerical defaults for the lab.

Any key may be overridden from the ``SLE_LAB`` dict in Django settings,
the same way ``REST_FRAMEWORK`` overrides ``rest_framework.settings``:

    SLE_LAB = {
        'BLOCK_SIZE': 512,
    }

Library code reads values lazily, so the modules also work when Django
settings are not configured (plain library use).
"""
from django.conf import settings

DEFAULTS = {
    # Execution
    'THREADS': 0,
    'OUT_DIR': 'out',
    'BLOCK_SIZE': 256,

    # Loewner evolution
    'SWALLOW_EPS_FACTOR': 1e-9,
    'OFFSET_EPS_FACTOR': 1e-9,

    # Radial-time SDEs
    'Q_FLOOR': 1e-12,
    'CLAMP_WARN_FRACTION': 1e-3,
    'GOOD_EVENT': {'u': 5.0, 'c_const': 1.0, 'lambda_boost': 4.0},

    # Jacobi expansion
    'N_TERMS': 64,
    'MAX_TERMS': 1024,
    'TRUNCATION_TOL': 1e-8,

    # Estimators
    'MIN_SURVIVORS': 100,
    'DISTORTION_CONSTANT': 1.0 / 16.0,
    'RESOLUTION_FACTOR': 10.0,
}


class LabSettings:
    """Attribute access to DEFAULTS with user overrides applied on every read."""

    def __init__(self, defaults=None):
        self.defaults = defaults or DEFAULTS

    @property
    def user_settings(self):
        if not settings.configured:
            return {}
        return getattr(settings, 'SLE_LAB', {})

    def __getattr__(self, attr):
        if attr not in self.defaults:
            raise AttributeError(f"Invalid lab setting: '{attr}'")
        return self.user_settings.get(attr, self.defaults[attr])


lab_settings = LabSettings(DEFAULTS)

import os

import django
import pytest


def pytest_configure():
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'sle_lab.test_settings')
    django.setup()


@pytest.fixture
def worked_params():
    """kappa=2, rho=-1.5, x=1, x_r=0: the worked example (a=1, mu_c=0.75)."""
    from spectrum.params import SleParams
    return SleParams(kappa=2.0, rho=-1.5, x=1.0, x_r=0.0)


@pytest.fixture
def worked_spectrum(worked_params):
    """Exponents of the worked example at zeta=0 (mu=1.5, beta=4/3)."""
    from spectrum.params import spectrum_params
    return spectrum_params(worked_params, 0.0)


@pytest.fixture
def hitting_params():
    """kappa=3, rho=-1, x=1, x_r=0: a boundary-hitting regime with d(beta_0)=0.5."""
    from spectrum.params import SleParams
    return SleParams(kappa=3.0, rho=-1.0, x=1.0, x_r=0.0)

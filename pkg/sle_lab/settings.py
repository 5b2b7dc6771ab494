"""
Django settings for the sle_lab project.

The project has no web surface: Django supplies the settings layer, the app
registry and the ``manage.py slelab`` management command. Environment
variables are read through python-decouple (a local ``.env`` is honoured).

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""
from pathlib import Path

from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config('SECRET_KEY', default='sle-lab-insecure-local-key')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'rest_framework',
    'spectrum',
    'drivers',
    'loewner',
    'radial',
    'qdiff',
    'estimators',
    'cli',
]

# No database is used; Django falls back to its dummy backend.
DATABASES = {}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Overrides for spectrum.conf.DEFAULTS; the remaining numerical constants
# (epsilons, floors, band constants) keep their defaults there.

SLE_LAB = {
    'THREADS': config('SLE_LAB_THREADS', default=0, cast=int),
    'OUT_DIR': config('SLE_LAB_OUT_DIR', default='out'),
    'BLOCK_SIZE': config('SLE_LAB_BLOCK_SIZE', default=256, cast=int),
    'RESOLUTION_FACTOR': config('SLE_LAB_RESOLUTION_FACTOR', default=10.0, cast=float),
}


# Logging

LOG_LEVEL = config('SLE_LAB_LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        app: {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False}
        for app in ('spectrum', 'drivers', 'loewner', 'radial', 'qdiff', 'estimators', 'cli')
    },
}

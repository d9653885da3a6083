"""
Django settings for the pricefront project.

The project has no web surface: it hosts the ``priceformation`` app, whose
management commands run the price-formation simulator, the adjoint
reconstruction and the experiments built on them.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/4.2/ref/settings/
"""

from pathlib import Path
from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config('SECRET_KEY', default='django-insecure-pricefront-local-development-key')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'priceformation',
]

# Commands and tests never touch a database.
DATABASES = {}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Price formation

# Directory the commands write CSV files into when --out is not given
PRICEFORMATION_OUTPUT_DIR = config('PRICEFORMATION_OUTPUT_DIR', default=str(BASE_DIR / 'output'))

# Worker processes for the per-basis control solves when --parallel is not given
PRICEFORMATION_PARALLEL = config('PRICEFORMATION_PARALLEL', default=1, cast=int)

PRICEFORMATION_LOG_LEVEL = config('PRICEFORMATION_LOG_LEVEL', default='INFO')


# Logging

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
        'priceformation': {
            'handlers': ['console'],
            'level': PRICEFORMATION_LOG_LEVEL,
            'propagate': False,
        },
    },
}

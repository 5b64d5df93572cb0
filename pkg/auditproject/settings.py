"""
Django settings for the auditproject project.

proxyaudit runs as a set of management commands; there is no web surface
and no database. Run defaults are read from the environment or a .env file
through python-decouple and collected in PROXYAUDIT.
"""

from pathlib import Path
from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config('DJANGO_SECRET_KEY', default='proxyaudit-local-only-not-secret')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'proxyaudit',
]

DATABASES = {}

# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Audit run defaults (command-line flags and --config files take precedence)
PROXYAUDIT = {
    'SEED': config('PROXYAUDIT_SEED', default=20240229, cast=int),
    'BOOTSTRAP_REPS': config('PROXYAUDIT_BOOTSTRAP_REPS', default=1000, cast=int),
    'ALPHA': config('PROXYAUDIT_ALPHA', default=0.05, cast=float),
    'THRESHOLD': config('PROXYAUDIT_THRESHOLD', default=0.5, cast=float),
    'GRID_RESOLUTION': config('PROXYAUDIT_GRID_RESOLUTION', default=21, cast=int),
    'WORKERS': config('PROXYAUDIT_WORKERS', default=1, cast=int),
    'OUTPUT_DIR': config('PROXYAUDIT_OUTPUT_DIR', default=str(BASE_DIR / 'output'), cast=Path),
}

LOG_LEVEL = config('PROXYAUDIT_LOG_LEVEL', default='INFO')

# Logging configuration
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'file': {
            'level': LOG_LEVEL,
            'class': 'logging.FileHandler',
            'filename': BASE_DIR / 'proxyaudit.log',
            'formatter': 'verbose',
        },
        'console': {
            'level': LOG_LEVEL,
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'proxyaudit': {
            'handlers': ['file', 'console'],
            'level': LOG_LEVEL,
            'propagate': True,
        },
        'django': {
            'handlers': ['file', 'console'],
            'level': 'WARNING',
            'propagate': True,
        },
    },
}

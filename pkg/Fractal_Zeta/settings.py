from pathlib import Path
import sys

from decouple import config
import dj_database_url
import sentry_sdk
from sentry_sdk.integrations.django import DjangoIntegration

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Environment settings
ENVIRONMENT = config('ENVIRONMENT', default='development')
IS_DEVELOPMENT = ENVIRONMENT == 'development'
IS_PRODUCTION = ENVIRONMENT == 'production'

TIME_ZONE = config('TIME_ZONE', default='UTC')
USE_TZ = True

# Sentry is optional; batch runs report unhandled failures when a DSN is set
SENTRY_DSN = config('SENTRY_DSN', default=None)
if SENTRY_DSN:
    sentry_sdk.init(
        dsn=SENTRY_DSN,
        integrations=[DjangoIntegration()],
        traces_sample_rate=0.0,
        environment=ENVIRONMENT,
        send_default_pii=False,
    )

SECRET_KEY = config('DJANGO_SECRET_KEY', default='fractal-zeta-local-only')
DEBUG = config('DJANGO_DEBUG', default=False, cast=bool)
ALLOWED_HOSTS = []

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'rest_framework',

    'graph_core',
    'fractal_builders',
    'cycle_oracle',
    'spectral_counts',
    'zeta_engine',
    'funceq',
    'studies',
]

DATABASES = {
    'default': dj_database_url.config(
        default=config('DATABASE_URL', default=f"sqlite:///{BASE_DIR / 'db.sqlite3'}"),
        conn_max_age=0,
    )
}

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Numerical run settings. Every value can be overridden from the environment.
ZETA_SETTINGS = {
    'MEMORY_BUDGET_MB': config('ZETA_MEMORY_BUDGET_MB', default=2048, cast=int),
    'MAX_VERTICES': config('ZETA_MAX_VERTICES', default=3_000_000, cast=int),
    'CYCLE_BUDGET': config('ZETA_CYCLE_BUDGET', default=5_000_000, cast=int),
    'FRONTIER_DEPTH': config('ZETA_FRONTIER_DEPTH', default=3, cast=int),
    'SERIES_ORDER_CAP': config('ZETA_SERIES_ORDER_CAP', default=64, cast=int),
    'EIG_DENSE_LIMIT': config('ZETA_EIG_DENSE_LIMIT', default=3000, cast=int),
    'DENSE_DIAGONAL_LIMIT': config('ZETA_DENSE_DIAGONAL_LIMIT', default=5000, cast=int),
    'OMEGA_BAND': config('ZETA_OMEGA_BAND', default=1e-6, cast=float),
    'CROSS_TOL': config('ZETA_CROSS_TOL', default=1e-3, cast=float),
    'FUNCEQ_TOL': config('ZETA_FUNCEQ_TOL', default=1e-8, cast=float),
    'OUTPUT_DIR': Path(config('ZETA_OUTPUT_DIR', default=str(BASE_DIR / 'runs'))),
    'SHOW_PROGRESS': config('ZETA_SHOW_PROGRESS', default=True, cast=bool) and 'test' not in sys.argv,
}

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{levelname} {name} {message}',
            'style': '{',
        },
        'json': {
            'format': '{"time": "%(asctime)s", "level": "%(levelname)s", "message": "%(message)s", "module": "%(module)s"}',
            'datefmt': '%Y-%m-%d %H:%M:%S'
        }
    },
    'handlers': {
        'console': {
            'level': 'DEBUG' if DEBUG else 'INFO',
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'json' if IS_PRODUCTION else 'simple',
        },
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': 'WARNING',
            'propagate': True,
        },
        'graph_core': {
            'handlers': ['console'],
            'level': 'INFO',
            'propagate': False,
        },
        'fractal_builders': {
            'handlers': ['console'],
            'level': 'INFO',
            'propagate': False,
        },
        'cycle_oracle': {
            'handlers': ['console'],
            'level': 'INFO',
            'propagate': False,
        },
        'spectral_counts': {
            'handlers': ['console'],
            'level': 'INFO',
            'propagate': False,
        },
        'zeta_engine': {
            'handlers': ['console'],
            'level': 'INFO',
            'propagate': False,
        },
        'funceq': {
            'handlers': ['console'],
            'level': 'INFO',
            'propagate': False,
        },
        'studies': {
            'handlers': ['console'],
            'level': 'INFO',
            'propagate': False,
        },
    },
}

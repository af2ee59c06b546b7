from .settings import *

# Override database configuration for testing
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': ':memory:',
    }
}

# Smaller budgets keep accidental large runs out of the test suite
ZETA_SETTINGS = {
    **ZETA_SETTINGS,
    'MEMORY_BUDGET_MB': 512,
    'MAX_VERTICES': 500_000,
    'CYCLE_BUDGET': 2_000_000,
    'SHOW_PROGRESS': False,
}

LOGGING['handlers']['console']['level'] = 'WARNING'

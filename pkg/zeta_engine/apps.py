from django.apps import AppConfig


class ZetaEngineConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'zeta_engine'
    verbose_name = 'Zeta series, Euler product and determinant formula'

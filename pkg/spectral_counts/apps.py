from django.apps import AppConfig


class SpectralCountsConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'spectral_counts'
    verbose_name = 'Path operator recursion and normalized traces'

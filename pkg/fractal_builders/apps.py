from django.apps import AppConfig


class FractalBuildersConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'fractal_builders'
    verbose_name = 'Self-similar exhaustions'

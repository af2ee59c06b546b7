from django.apps import AppConfig


class FunceqConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'funceq'
    verbose_name = 'Completions and functional equations'

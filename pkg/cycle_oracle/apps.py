from django.apps import AppConfig


class CycleOracleConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'cycle_oracle'
    verbose_name = 'Brute-force closed path census'

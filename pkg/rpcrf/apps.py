from django.apps import AppConfig


class RpcrfConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'rpcrf'
    verbose_name = 'Regular-pattern CRF'

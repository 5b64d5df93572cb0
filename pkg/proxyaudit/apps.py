from django.apps import AppConfig


class ProxyauditConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'proxyaudit'
    verbose_name = 'Proxy group fairness audit'

from django.apps import AppConfig


class PriceFormationConfig(AppConfig):
    name = 'priceformation'
    verbose_name = 'Price formation'

from django.apps import AppConfig


class GqdConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "gqd"
    verbose_name = "Global quantum discord of the XY chain"

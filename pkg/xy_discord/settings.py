"""
Django settings for the xy_discord project.

The project has no web surface and no database: Django provides the
command-line entry point (management commands), configuration,
form-based validation of run configurations, logging and the test runner.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/4.1/ref/settings/
"""
import os
import sys
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / "subdir".
BASE_DIR = Path(__file__).resolve().parent.parent


SECRET_KEY = os.environ.get(
    "DJANGO_SECRET_KEY", "xy-discord-local-only-9v2#k1m0q8r7t6w5e4"
)


# Application definition

INSTALLED_APPS = [
    "gqd",
]

# Results are persisted as files, never in a database.
DATABASES = {}


# Internationalization

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"


# Logging

# `manage.py test` only reports warnings unless GQD_LOG_LEVEL says otherwise.
TESTING = sys.argv[1:2] == ["test"]

GQD_LOG_LEVEL = os.environ.get("GQD_LOG_LEVEL", "WARNING" if TESTING else "INFO")

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {
            "format": "{asctime} {levelname} {name}: {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "plain",
        },
    },
    "loggers": {
        "gqd": {
            "handlers": ["console"],
            "level": GQD_LOG_LEVEL,
            "propagate": False,
        },
    },
}


# Study defaults

GQD = {
    "OPTIMIZER": {
        "starts": 24,
        "seed": int(os.environ.get("GQD_SEED", "0")),
        "max_evals": 5000,
        "simplex_tolerance": 1e-9,
    },
    "DEGENERACY_TOLERANCE": 1e-9,
    "SUDDEN_CHANGE": {
        "jump_factor": 5.0,
        "absolute_floor": 1e-3,
        "fidelity_threshold": 0.99,
    },
    "H_RANGE": (0.0, 1.5, 0.01),
    "OUTPUT_DIR": Path(os.environ.get("GQD_OUTPUT_DIR", BASE_DIR / "results")),
    "FORMATS": ("csv", "json"),
    "WORKERS": int(os.environ.get("GQD_WORKERS", os.cpu_count() or 1)),
}

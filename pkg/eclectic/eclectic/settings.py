"""
Django settings for the eclectic project.

Process-level defaults live here; every value can be overridden from the
environment (or a .env file). Run-level experiment settings come from the
TOML file passed with --config and are validated in core/serializers.py.
"""

from pathlib import Path
import os
from dotenv import load_dotenv

load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv("DJANGO_SECRET_KEY", "eclectic-local-only")

DEBUG = os.getenv("DJANGO_DEBUG", "False").lower() == "true"

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "rest_framework",
    "core",
]

TOOL_VERSION = "0.4.0"


# Database
# SQLite for laptop runs, Postgres when the compose stack provides one.

if os.getenv("POSTGRES_HOST"):
    DATABASES = {
        "default": {
            "ENGINE": "django.db.backends.postgresql",
            "NAME": os.getenv("POSTGRES_DB", "eclectic_db"),
            "USER": os.getenv("POSTGRES_USER", "eclectic_user"),
            "PASSWORD": os.getenv("POSTGRES_PASSWORD", "eclectic_pass"),
            "HOST": os.getenv("POSTGRES_HOST"),
            "PORT": os.getenv("POSTGRES_PORT", 5432),
        }
    }
else:
    DATABASES = {
        "default": {
            "ENGINE": "django.db.backends.sqlite3",
            "NAME": os.getenv("SQLITE_PATH", str(BASE_DIR / "eclectic.sqlite3")),
        }
    }

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# Record every CLI run in the RunManifest table.
RECORD_RUNS = os.getenv("ECLECTIC_RECORD_RUNS", "True").lower() == "true"


# Internationalization

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True


# Logging

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{asctime} {levelname} {name} {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "verbose",
        },
    },
    "loggers": {
        "core": {
            "handlers": ["console"],
            "level": os.getenv("ECLECTIC_LOG_LEVEL", "WARNING"),
            "propagate": False,
        },
    },
}


# Portfolio construction defaults (overridable per run from the TOML config)

TRANSACTION_COST = float(os.getenv("ECLECTIC_TRANSACTION_COST", "0.005"))
BOX_MULTIPLIER = float(os.getenv("ECLECTIC_BOX_MULTIPLIER", "5"))
REBALANCE_STEP_DAYS = int(os.getenv("ECLECTIC_REBALANCE_STEP_DAYS", "2"))
FIT_WINDOW_STEPS = int(os.getenv("ECLECTIC_FIT_WINDOW_STEPS", "91"))
BLEND_WINDOW_STEPS = int(os.getenv("ECLECTIC_BLEND_WINDOW_STEPS", "26"))
N_SCENARIOS = int(os.getenv("ECLECTIC_N_SCENARIOS", "1000"))
COST_AVERSIONS = [1.0, 2.0, 3.0]
QUANTILE_LEVELS = [0.05, 0.1, 0.5]
DECAY_FACTORS = [0.9, 0.99, 0.999]

CV_FOLDS = int(os.getenv("ECLECTIC_CV_FOLDS", "7"))
CV_SEED = int(os.getenv("ECLECTIC_CV_SEED", "0"))
LASSO_GRID_SIZE = 100
LASSO_GRID_RATIO = 1e-4

CANDLE_FETCH = {
    "endpoint": os.getenv(
        "ECLECTIC_FETCH_ENDPOINT",
        "https://api.binance.com/api/v3/klines?symbol={symbol}&interval={interval}"
        "&startTime={start}&endTime={end}&limit={limit}",
    ),
    "interval": os.getenv("ECLECTIC_FETCH_INTERVAL", "1d"),
    "page_limit": int(os.getenv("ECLECTIC_FETCH_PAGE_LIMIT", "1000")),
    "rate_limit_ms": int(os.getenv("ECLECTIC_FETCH_RATE_LIMIT_MS", "250")),
    "max_retries": int(os.getenv("ECLECTIC_FETCH_MAX_RETRIES", "5")),
    "timeout": float(os.getenv("ECLECTIC_FETCH_TIMEOUT", "10")),
}


# Celery

CELERY_BROKER_URL = os.getenv(
    "CELERY_BROKER_URL",
    f"redis://{os.getenv('REDIS_HOST','redis')}:{os.getenv('REDIS_PORT','6379')}/0",
)
CELERY_RESULT_BACKEND = os.getenv(
    "CELERY_RESULT_BACKEND",
    f"redis://{os.getenv('REDIS_HOST','redis')}:{os.getenv('REDIS_PORT','6379')}/1",
)

CELERY_ACCEPT_CONTENT = ["json"]
CELERY_TASK_SERIALIZER = "json"
CELERY_RESULT_SERIALIZER = "json"
CELERY_TIMEZONE = "UTC"

# Laptop runs execute jobs in-process (or on a local billiard pool).
CELERY_TASK_ALWAYS_EAGER = (
    os.getenv("CELERY_TASK_ALWAYS_EAGER", "True").lower() == "true"
)
CELERY_TASK_EAGER_PROPAGATES = True

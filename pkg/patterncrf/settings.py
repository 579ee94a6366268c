"""
Django settings for the patterncrf project.

Only the pieces the command-line toolkit needs are configured: the rpcrf app,
a SQLite run ledger and logging. Every tunable can be overridden from the
environment or a .env file.
"""

from pathlib import Path
import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.getenv('DJANGO_SECRET_KEY', 'django-insecure-patterncrf-local-development-key')

DEBUG = os.getenv('DEBUG', 'False').lower() == 'true'

ALLOWED_HOSTS = []


def _env_list(name, default):
    raw = os.getenv(name, default)
    return tuple(int(part) for part in raw.split(',') if part.strip())


# Pattern CRF defaults (command-line flags and --config files take precedence)
RPCRF = {
    'MAX_PRODUCT_STATES': int(os.getenv('RPCRF_MAX_PRODUCT_STATES', '1000000')),
    'L2': float(os.getenv('RPCRF_L2', '1e-4')),
    'LEARNING_RATE': float(os.getenv('RPCRF_LEARNING_RATE', '0.1')),
    'MAX_EPOCHS': int(os.getenv('RPCRF_MAX_EPOCHS', '500')),
    'TOLERANCE': float(os.getenv('RPCRF_TOLERANCE', '1e-6')),
    'WINDOW_RADIUS': int(os.getenv('RPCRF_WINDOW_RADIUS', '1')),
    'ANCHOR_POSITIONS': _env_list('RPCRF_ANCHOR_POSITIONS', '1'),
    'TRAIN_SIZE': int(os.getenv('RPCRF_TRAIN_SIZE', '10000')),
    'TEST_SIZE': int(os.getenv('RPCRF_TEST_SIZE', '2000')),
}

RPCRF_LOG_LEVEL = os.getenv('RPCRF_LOG_LEVEL', 'INFO').upper()


# Application definition

INSTALLED_APPS = [
    'rpcrf',
]


# Database
# https://docs.djangoproject.com/en/5.2/ref/settings/#databases

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.getenv('RPCRF_DATABASE', str(BASE_DIR / 'db.sqlite3')),
    }
}


# Logging
# https://docs.djangoproject.com/en/5.2/topics/logging/

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'rpcrf': {
            'handlers': ['console'],
            'level': RPCRF_LOG_LEVEL,
            'propagate': False,
        },
    },
}


# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

# Default primary key field type
# https://docs.djangoproject.com/en/5.2/ref/settings/#default-auto-field

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

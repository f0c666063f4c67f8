"""
Production settings.

Serves the web surface behind gunicorn with WhiteNoise for static files.
Every engine tunable can be overridden from the environment.
"""

import os
from .settings import *

# Production settings
DEBUG = False

# Secret key from environment variable
SECRET_KEY = os.getenv('SECRET_KEY', SECRET_KEY)

ALLOWED_HOSTS = [host for host in os.getenv('ALLOWED_HOSTS', 'localhost,127.0.0.1').split(',') if host]

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.getenv('SALIENCY_DB_PATH', BASE_DIR / 'db.sqlite3'),
    }
}

# Static files configuration for production
STATIC_URL = '/static/'
STATIC_ROOT = os.path.join(BASE_DIR, 'staticfiles')

# WhiteNoise configuration for static file serving
MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'whitenoise.middleware.WhiteNoiseMiddleware',  # Add WhiteNoise
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

STORAGES = {
    'default': {
        'BACKEND': 'django.core.files.storage.FileSystemStorage',
    },
    'staticfiles': {
        'BACKEND': 'whitenoise.storage.CompressedManifestStaticFilesStorage',
    },
}

# Security settings
SECURE_CONTENT_TYPE_NOSNIFF = True
X_FRAME_OPTIONS = 'DENY'

# Saliency engine overrides
SALIENCY_LRP_EPSILON = float(os.getenv('SALIENCY_LRP_EPSILON', SALIENCY_LRP_EPSILON))
SALIENCY_ORACLE_PATH_CAP = int(os.getenv('SALIENCY_ORACLE_PATH_CAP', SALIENCY_ORACLE_PATH_CAP))
SALIENCY_ORACLE_TOLERANCE = float(os.getenv('SALIENCY_ORACLE_TOLERANCE', SALIENCY_ORACLE_TOLERANCE))
SALIENCY_BENCH_WARMUP = int(os.getenv('SALIENCY_BENCH_WARMUP', SALIENCY_BENCH_WARMUP))
SALIENCY_BENCH_RUNS = int(os.getenv('SALIENCY_BENCH_RUNS', SALIENCY_BENCH_RUNS))
SALIENCY_DEFAULT_THREADS = int(os.getenv('SALIENCY_DEFAULT_THREADS', SALIENCY_DEFAULT_THREADS))
SALIENCY_MODEL_ROOT = Path(os.getenv('SALIENCY_MODEL_ROOT', SALIENCY_MODEL_ROOT))
SALIENCY_MAX_UPLOAD_PIXELS = int(os.getenv('SALIENCY_MAX_UPLOAD_PIXELS', SALIENCY_MAX_UPLOAD_PIXELS))

# Logging configuration
LOGGING['root'] = {
    'handlers': ['console'],
    'level': 'INFO',
}

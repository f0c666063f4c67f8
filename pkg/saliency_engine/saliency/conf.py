"""
Application settings with defaults.

Engine modules never read ``django.conf.settings`` directly; commands and
views take configured values from ``app_settings`` and pass them on as
explicit arguments.
"""

from django.conf import settings

DEFAULTS = {
    "LRP_EPSILON": 100.0,
    "ORACLE_PATH_CAP": 10_000_000,
    "ORACLE_TOLERANCE": 1e-5,
    "BENCH_WARMUP": 2,
    "BENCH_RUNS": 10,
    "DEFAULT_THREADS": 1,
    "MODEL_ROOT": None,
    "MAX_UPLOAD_PIXELS": 1_000_000,
}


class AppSettings:
    """
    Lazy view over the ``SALIENCY_*`` Django settings.

    ``app_settings.LRP_EPSILON`` returns ``settings.SALIENCY_LRP_EPSILON``
    when defined and the default from ``DEFAULTS`` otherwise. Values are read
    on every access so ``override_settings`` works in tests.
    """

    prefix = "SALIENCY_"

    def __getattr__(self, name):
        if name not in DEFAULTS:
            raise AttributeError(f"unknown saliency setting {name!r}")
        value = getattr(settings, self.prefix + name, DEFAULTS[name])
        if name == "MODEL_ROOT" and value is None:
            value = settings.BASE_DIR / "models"
        return value


app_settings = AppSettings()

"""
Django App Configuration for the saliency engine.

The saliency app hosts the numeric engine (forward inference, VisualBackProp,
epsilon-rule relevance propagation, the flow-graph oracle), its management
commands and a small web surface for inspecting saved models.
"""

from django.apps import AppConfig


class SaliencyConfig(AppConfig):
    """
    Configuration class for the saliency Django app.

    Features:
        - Model manifests with checksummed weight blobs and preset generators
        - VisualBackProp and LRP masks from the command line and the browser
        - Benchmark history stored per model artifact
        - Exhaustive flow-graph verification on tiny networks
    """
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'saliency'
    verbose_name = 'Saliency Engine'

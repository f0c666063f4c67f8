"""
Shared plumbing for the saliency management commands.

Every command accepts a model reference in one of three forms:

    path/to/manifest.json (or the directory holding manifest.json)
    preset:NAME or preset:NAME:SEED
    the name of a registered ModelArtifact

Engine failures (SaliencyError) and file-system failures (OSError) become
CommandError, so the command exits non-zero with the message on stderr.
"""

import json
import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError
from threadpoolctl import threadpool_limits

from ..conf import app_settings
from ..exceptions import SaliencyError
from ..imaging import load_image, to_input_tensor
from ..model_io import load_model
from ..models import ModelArtifact
from ..presets import preset

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
PRESET_PREFIX = "preset:"


class ResolvedModel:
    """A loaded model plus the label and artifact (if any) it came from."""

    def __init__(self, model, label, artifact=None):
        self.model = model
        self.label = label
        self.artifact = artifact


def resolve_model(reference):
    """
    Load the model a command argument refers to.

    Args:
        reference (str): Manifest path, ``preset:NAME[:SEED]`` or artifact name

    Returns:
        ResolvedModel: Loaded model with its label

    Raises:
        SaliencyError: If the manifest or preset is invalid
        CommandError: If nothing matches the reference
    """
    if reference.startswith(PRESET_PREFIX):
        name, _, seed = reference[len(PRESET_PREFIX):].partition(":")
        try:
            seed = int(seed) if seed else 0
        except ValueError:
            raise CommandError(f"preset seed must be an integer, got {seed!r}") from None
        return ResolvedModel(preset(name, seed), f"{name}:{seed}")

    path = Path(reference)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if path.exists():
        artifact = _artifact_for_path(path)
        return ResolvedModel(load_model(path), artifact.name if artifact else str(path), artifact)

    try:
        artifact = ModelArtifact.objects.filter(name=reference).first()
    except DatabaseError as exc:
        raise CommandError(f"{reference!r} is not a file and the artifact registry is unavailable: {exc}") from exc
    if artifact is None:
        raise CommandError(f"no manifest, preset or registered artifact named {reference!r}")
    return ResolvedModel(artifact.load(), artifact.name, artifact)


def _artifact_for_path(path):
    try:
        return ModelArtifact.objects.filter(manifest_path=str(path.resolve())).first()
    except DatabaseError:
        return None


def load_input(image_path):
    """Read a netpbm image and scale it to a (C, H, W) tensor in [0, 1]."""
    image = load_image(image_path)
    return image, to_input_tensor(image)


def write_json(stream, payload):
    stream.write(json.dumps(payload, indent=2, sort_keys=True))


class SaliencyCommand(BaseCommand):
    """
    Base class translating engine errors and capping BLAS threads.

    Subclasses implement ``run(**options)`` instead of ``handle``.
    ``default_threads`` of None leaves the machine's thread pools untouched
    unless ``--threads`` is given.
    """

    default_threads = "settings"

    def add_arguments(self, parser):
        parser.add_argument("--threads", type=int, default=None,
                            help="BLAS thread cap (default: SALIENCY_DEFAULT_THREADS)")

    def thread_limit(self, options):
        threads = options.get("threads")
        if threads is None and self.default_threads == "settings":
            threads = app_settings.DEFAULT_THREADS
        if threads is not None and threads < 1:
            raise CommandError("--threads must be at least 1")
        return threads

    def handle(self, *args, **options):
        threads = self.thread_limit(options)
        try:
            if threads is None:
                return self.run(**options)
            with threadpool_limits(limits=threads):
                return self.run(**options)
        except (SaliencyError, OSError) as exc:
            logger.debug("%s failed", self.__class__.__module__, exc_info=True)
            raise CommandError(str(exc)) from exc

    def run(self, **options):
        raise NotImplementedError("subclasses of SaliencyCommand must provide a run() method")

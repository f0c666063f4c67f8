from pathlib import Path

from django.core.management.base import CommandError

from ...conf import app_settings
from ...model_io import save_model
from ...models import ModelArtifact
from ...presets import PRESETS, preset
from ..base import MANIFEST_NAME, SaliencyCommand


class Command(SaliencyCommand):
    help = "Generate a preset network and save it as manifest.json + weights.bin."

    def add_arguments(self, parser):
        parser.add_argument("name", choices=sorted(PRESETS))
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--out", help="Output directory (default: SALIENCY_MODEL_ROOT/<name>-<seed>)")
        parser.add_argument("--register", action="store_true", help="Record the result as a ModelArtifact")
        parser.add_argument("--artifact-name", help="Registry name (default: <name>-<seed>)")
        super().add_arguments(parser)

    def run(self, **options):
        label = options["artifact_name"] or f"{options['name']}-{options['seed']}"
        directory = Path(options["out"]) if options["out"] else Path(app_settings.MODEL_ROOT) / label
        directory.mkdir(parents=True, exist_ok=True)
        model = preset(options["name"], options["seed"])
        manifest_path = directory / MANIFEST_NAME
        save_model(model, manifest_path)
        self.stdout.write(str(manifest_path))

        if options["register"]:
            if ModelArtifact.objects.filter(name=label).exists():
                raise CommandError(f"an artifact named {label!r} is already registered")
            ModelArtifact.objects.create(
                name=label,
                manifest_path=str(manifest_path.resolve()),
                preset=options["name"],
                seed=options["seed"],
                input_shape=ModelArtifact.shape_label(model.input_shape),
            )
            self.stderr.write(f"registered artifact {label}")

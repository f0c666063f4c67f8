from ...inference import forward
from ..base import SaliencyCommand, load_input, resolve_model


class Command(SaliencyCommand):
    help = "Run the model on one image and print the outputs, one per line."

    def add_arguments(self, parser):
        parser.add_argument("model", help="Manifest path, preset:NAME[:SEED] or artifact name")
        parser.add_argument("image", help="P5/P6 netpbm input image")
        super().add_arguments(parser)

    def run(self, **options):
        resolved = resolve_model(options["model"])
        _, x = load_input(options["image"])
        result = forward(resolved.model, x)
        for value in result.output:
            self.stdout.write(f"{float(value):.6f}")

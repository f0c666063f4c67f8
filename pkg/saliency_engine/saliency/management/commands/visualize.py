"""
Write a saliency mask (and optionally a red overlay) for one image.

The mask is written as P5 with values round(255 * mask). With
``--intermediates DIR`` every VisualBackProp stage mask is written as
``stage_<l>.pgm``, stretched to the full 8-bit range per file.
"""

import logging
from pathlib import Path

from django.core.management.base import CommandError

from ...conf import app_settings
from ...imaging import mask_to_image, overlay_red, save_image, to_grayscale
from ...lrp import LrpConfig, lrp_relevance
from ...tensor import normalize_unit_interval
from ...visualbackprop import visualbackprop
from ..base import SaliencyCommand, load_input, resolve_model

logger = logging.getLogger(__name__)


class Command(SaliencyCommand):
    help = "Compute a VisualBackProp or LRP mask and write it as an image."

    def add_arguments(self, parser):
        parser.add_argument("model", help="Manifest path, preset:NAME[:SEED] or artifact name")
        parser.add_argument("image", help="P5/P6 netpbm input image")
        parser.add_argument("--method", choices=["vbp", "lrp"], default="vbp")
        parser.add_argument("--out", default="mask.pgm", help="Mask output path (.pgm or .png)")
        parser.add_argument("--overlay", help="Red overlay output path (.ppm or .png)")
        parser.add_argument("--epsilon", type=float, default=None,
                            help="LRP stabilizer (default: SALIENCY_LRP_EPSILON)")
        parser.add_argument("--output-index", type=int, default=None,
                            help="Output neuron explained by LRP")
        parser.add_argument("--intermediates", help="Directory for per-stage VisualBackProp masks")
        super().add_arguments(parser)

    def run(self, **options):
        method = options["method"]
        if options["intermediates"] and method != "vbp":
            raise CommandError("--intermediates is only available with --method vbp")
        resolved = resolve_model(options["model"])
        image, x = load_input(options["image"])

        if method == "vbp":
            mask = visualbackprop(resolved.model, x, keep_intermediates=bool(options["intermediates"]))
        else:
            epsilon = options["epsilon"] if options["epsilon"] is not None else app_settings.LRP_EPSILON
            result = lrp_relevance(resolved.model, x, LrpConfig(epsilon=epsilon, output_index=options["output_index"]))
            logger.info("lrp explained output %d with epsilon %g", result.output_index, epsilon)
            mask = result.mask

        save_image(mask_to_image(mask), options["out"])
        self.stdout.write(f"mask written to {options['out']}")
        if options["overlay"]:
            save_image(overlay_red(to_grayscale(image), mask), options["overlay"])
            self.stdout.write(f"overlay written to {options['overlay']}")
        if options["intermediates"]:
            directory = Path(options["intermediates"])
            directory.mkdir(parents=True, exist_ok=True)
            for level, stage_mask in enumerate(mask.intermediates, start=1):
                save_image(mask_to_image(normalize_unit_interval(stage_mask)), directory / f"stage_{level}.pgm")
            self.stdout.write(f"{len(mask.intermediates)} stage masks written to {directory}")

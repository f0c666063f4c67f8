from ...conf import app_settings
from ...lrp import LrpConfig, lrp_relevance
from ...similarity import compare_masks
from ...visualbackprop import visualbackprop
from ..base import SaliencyCommand, load_input, resolve_model, write_json


class Command(SaliencyCommand):
    help = "Compare the VisualBackProp and LRP masks of one image and print agreement metrics as JSON."

    def add_arguments(self, parser):
        parser.add_argument("model", help="Manifest path, preset:NAME[:SEED] or artifact name")
        parser.add_argument("image", help="P5/P6 netpbm input image")
        parser.add_argument("--epsilon", type=float, default=None)
        parser.add_argument("--output-index", type=int, default=None)
        super().add_arguments(parser)

    def run(self, **options):
        resolved = resolve_model(options["model"])
        _, x = load_input(options["image"])
        epsilon = options["epsilon"] if options["epsilon"] is not None else app_settings.LRP_EPSILON
        vbp = visualbackprop(resolved.model, x)
        lrp = lrp_relevance(resolved.model, x, LrpConfig(epsilon=epsilon, output_index=options["output_index"]))
        write_json(self.stdout, compare_masks(vbp, lrp.mask).as_dict())

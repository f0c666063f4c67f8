"""
Time mask computation for one model.

Both methods are timed given a completed forward pass. ``--method both``
prints the two reports side by side with the measured LRP/VBP ratio and the
mean forward time. Threads default to the machine's BLAS configuration.
"""

import numpy as np
from django.core.management.base import CommandError

from ...benchmark import compare_methods, run_bench
from ...conf import app_settings
from ...lrp import LrpConfig
from ...models import BenchRecord
from ..base import SaliencyCommand, load_input, resolve_model, write_json

INPUT_SEED = 0


class Command(SaliencyCommand):
    help = "Benchmark VisualBackProp and/or LRP mask computation and print a JSON report."
    default_threads = None

    def add_arguments(self, parser):
        parser.add_argument("model", help="Manifest path, preset:NAME[:SEED] or artifact name")
        parser.add_argument("--image", help="P5/P6 input; a seeded uniform input is used when omitted")
        parser.add_argument("--method", choices=["vbp", "lrp", "both"], default="vbp")
        parser.add_argument("--runs", type=int, default=None, help="Timed runs (default: SALIENCY_BENCH_RUNS)")
        parser.add_argument("--warmup", type=int, default=None, help="Untimed runs (default: SALIENCY_BENCH_WARMUP)")
        parser.add_argument("--epsilon", type=float, default=None)
        parser.add_argument("--record", action="store_true", help="Store the report as a BenchRecord")
        super().add_arguments(parser)

    def run(self, **options):
        runs = options["runs"] if options["runs"] is not None else app_settings.BENCH_RUNS
        warmup = options["warmup"] if options["warmup"] is not None else app_settings.BENCH_WARMUP
        if runs < 1:
            raise CommandError("--runs must be at least 1")
        resolved = resolve_model(options["model"])
        model = resolved.model
        if options["image"]:
            _, x = load_input(options["image"])
        else:
            x = np.random.default_rng(INPUT_SEED).uniform(0.0, 1.0, size=model.input_shape).astype(np.float32)
        epsilon = options["epsilon"] if options["epsilon"] is not None else app_settings.LRP_EPSILON
        lrp_config = LrpConfig(epsilon=epsilon)

        if options["method"] == "both":
            summary, reports = compare_methods(model, x, runs, warmup, options["threads"], resolved.label, lrp_config)
            write_json(self.stdout, summary)
            recorded = reports.values()
        else:
            report = run_bench(model, x, options["method"], runs, warmup, options["threads"], resolved.label, lrp_config)
            write_json(self.stdout, report.to_dict())
            recorded = [report]

        if options["record"]:
            for report in recorded:
                BenchRecord.from_report(report, artifact=resolved.artifact)
            self.stderr.write(f"stored {len(recorded)} bench record(s)")

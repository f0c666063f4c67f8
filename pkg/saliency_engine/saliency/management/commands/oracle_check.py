"""
Verify VisualBackProp against the flow-graph oracle on random tiny networks.

Prints an aggregate JSON summary. Exits non-zero when any trial fails;
inconclusive trials (every oracle value zero) are counted, not failed.
"""

from django.core.management.base import CommandError

from ...conf import app_settings
from ...flow_oracle import run_oracle_trials
from ..base import SaliencyCommand, write_json


class Command(SaliencyCommand):
    help = "Run seeded oracle trials on random conv+ReLU networks and print a JSON summary."

    def add_arguments(self, parser):
        parser.add_argument("--seed", type=int, default=1)
        parser.add_argument("--trials", type=int, default=20)
        parser.add_argument("--max-size", type=int, nargs=2, default=[6, 6], metavar=("H", "W"))
        parser.add_argument("--tolerance", type=float, default=None,
                            help="Largest accepted ratio spread (default: SALIENCY_ORACLE_TOLERANCE)")
        parser.add_argument("--path-cap", type=int, default=None,
                            help="Enumeration cap (default: SALIENCY_ORACLE_PATH_CAP)")
        super().add_arguments(parser)

    def run(self, **options):
        if options["trials"] < 1:
            raise CommandError("--trials must be at least 1")
        max_h, max_w = options["max_size"]
        if min(max_h, max_w) < 1:
            raise CommandError("--max-size extents must be positive")
        tolerance = options["tolerance"] if options["tolerance"] is not None else app_settings.ORACLE_TOLERANCE
        path_cap = options["path_cap"] if options["path_cap"] is not None else app_settings.ORACLE_PATH_CAP
        summary = run_oracle_trials(
            seed=options["seed"],
            trials=options["trials"],
            max_size=(max_h, max_w),
            tolerance=tolerance,
            path_cap=path_cap,
        )
        write_json(self.stdout, summary)
        if summary["failed"]:
            raise CommandError(f"{summary['failed']} of {summary['trials']} oracle trials failed")

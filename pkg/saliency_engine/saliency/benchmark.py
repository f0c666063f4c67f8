"""
Wall-clock timing of mask computation.

Both methods are timed given a completed forward pass: VisualBackProp times
``mask_from_trace`` on the recorded activation trace, LRP times
``relevance_from_forward`` on the recorded layer inputs. The forward pass is
run once, outside the timed region, and can be timed separately for context.
BLAS threading is capped with threadpoolctl for the duration of a run.
"""

import contextlib
import logging
import os
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Optional

import numpy as np
from threadpoolctl import threadpool_info, threadpool_limits

from .exceptions import SaliencyError
from .inference import forward
from .lrp import LrpConfig, relevance_from_forward
from .visualbackprop import mask_from_trace

logger = logging.getLogger(__name__)

METHODS = ("vbp", "lrp")
TIMED_REGIONS = {
    "vbp": "mask_from_trace on a completed forward pass (forward excluded)",
    "lrp": "relevance_from_forward on a completed forward pass (forward excluded)",
    "forward": "forward pass with recorded layer inputs",
}


@dataclass
class BenchReport:
    method: str
    model_name: str
    input_shape: list
    warmup_runs: int
    timed_runs: int
    per_run_ms: list = field(default_factory=list)
    mean_ms: float = 0.0
    p50_ms: float = 0.0
    min_ms: float = 0.0
    thread_count: int = 1
    timed_region: str = ""
    deterministic: bool = True
    timestamp: str = ""

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_samples(cls, samples, **kwargs):
        samples = [float(sample) for sample in samples]
        return cls(
            per_run_ms=samples,
            timed_runs=len(samples),
            mean_ms=float(np.mean(samples)),
            p50_ms=float(np.median(samples)),
            min_ms=float(np.min(samples)),
            timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            **kwargs,
        )


def effective_thread_count(threads):
    if threads:
        return int(threads)
    counts = [info.get("num_threads", 1) for info in threadpool_info()]
    return max(counts, default=os.cpu_count() or 1)


def _thread_limit(threads):
    if threads:
        return threadpool_limits(limits=int(threads))
    return contextlib.nullcontext()


def _timed(work, runs, warmup):
    """Run ``work`` warmup + runs times; return (samples in ms, outputs of the timed runs)."""
    for _ in range(warmup):
        work()
    samples = []
    outputs = []
    for _ in range(runs):
        start = time.perf_counter()
        outputs.append(work())
        samples.append((time.perf_counter() - start) * 1000.0)
    return samples, outputs


def _mask_work(model, x, method, lrp_config):
    if method == "vbp":
        trace = forward(model, x).trace
        return lambda: mask_from_trace(trace).values
    if method == "lrp":
        result = forward(model, x, record_inputs=True)
        return lambda: relevance_from_forward(model, result, lrp_config).mask.values
    raise SaliencyError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


def run_bench(model, x, method, runs, warmup=0, threads=None, model_name="", lrp_config=None):
    """
    Time one saliency method on a fixed model and input.

    Args:
        model (Model): Model to explain
        x (numpy.ndarray): Input tensor
        method (str): ``vbp`` or ``lrp``
        runs (int): Timed repetitions, at least 1
        warmup (int): Untimed repetitions before timing
        threads (int | None): BLAS thread cap; None leaves the machine default
        model_name (str): Label stored in the report
        lrp_config (LrpConfig | None): Rule parameters for ``lrp``

    Returns:
        BenchReport: Per-run samples and summary statistics

    Raises:
        SaliencyError: For an unknown method or fewer than one run
    """
    if runs < 1:
        raise SaliencyError(f"runs must be at least 1, got {runs}")
    if warmup < 0:
        raise SaliencyError(f"warmup must be non-negative, got {warmup}")
    with _thread_limit(threads):
        work = _mask_work(model, x, method, lrp_config or LrpConfig())
        samples, masks = _timed(work, runs, warmup)
        thread_count = effective_thread_count(threads)
    deterministic = all(np.array_equal(masks[0], mask) for mask in masks[1:])
    if not deterministic:
        logger.error("%s masks differ between timed runs", method)
    report = BenchReport.from_samples(
        samples,
        method=method,
        model_name=model_name,
        input_shape=list(model.input_shape),
        warmup_runs=warmup,
        thread_count=thread_count,
        timed_region=TIMED_REGIONS[method],
        deterministic=deterministic,
    )
    logger.info("%s on %s: mean %.3f ms over %d runs", method, model_name or "model", report.mean_ms, runs)
    return report


def time_forward(model, x, runs, warmup=0, threads=None):
    """Mean wall-clock time of the forward pass alone, in milliseconds."""
    with _thread_limit(threads):
        samples, _ = _timed(lambda: forward(model, x, record_inputs=True).output, runs, warmup)
    return float(np.mean(samples))


def compare_methods(model, x, runs, warmup=0, threads=None, model_name="", lrp_config=None):
    """
    Time both methods on the same model and input.

    Returns:
        tuple[dict, dict]: A JSON-ready summary with the ``vbp`` and ``lrp``
        reports as dicts, ``lrp_over_vbp`` (ratio of mean times, None if the
        vbp mean is zero) and ``forward_mean_ms``; and the two BenchReport
        objects keyed by method
    """
    reports = {
        method: run_bench(model, x, method, runs, warmup, threads, model_name, lrp_config)
        for method in METHODS
    }
    vbp_mean = reports["vbp"].mean_ms
    ratio: Optional[float] = reports["lrp"].mean_ms / vbp_mean if vbp_mean > 0 else None
    return {
        "vbp": reports["vbp"].to_dict(),
        "lrp": reports["lrp"].to_dict(),
        "lrp_over_vbp": ratio,
        "forward_mean_ms": time_forward(model, x, runs, warmup, threads),
        "forward_region": TIMED_REGIONS["forward"],
    }, reports

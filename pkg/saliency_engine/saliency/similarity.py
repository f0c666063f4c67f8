"""
Agreement metrics between two saliency masks of the same shape.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy import stats

from .exceptions import ShapeError
from .tensor import ACCUMULATOR

logger = logging.getLogger(__name__)

TOP_FRACTION = 0.05


@dataclass(frozen=True)
class MaskSimilarity:
    """
    Attributes:
        pearson (float | None): Linear correlation, None if either mask is constant
        spearman (float | None): Rank correlation, None if either mask is constant
        jaccard_top5 (float): Overlap of the top-``top_fraction`` pixel sets
        top_fraction (float): Fraction of pixels in each top set
        pixels (int): Number of pixels compared
    """

    pearson: Optional[float]
    spearman: Optional[float]
    jaccard_top5: float
    top_fraction: float
    pixels: int

    def as_dict(self):
        return asdict(self)


def _flat_pair(a, b):
    a = np.asarray(getattr(a, "values", a), dtype=ACCUMULATOR)
    b = np.asarray(getattr(b, "values", b), dtype=ACCUMULATOR)
    if a.shape != b.shape:
        raise ShapeError(f"cannot compare masks of shapes {a.shape} and {b.shape}")
    return a.ravel(), b.ravel()


def _is_constant(values):
    return values.size < 2 or values.min() == values.max()


def _correlation(statistic, a, b):
    if _is_constant(a) or _is_constant(b):
        return None
    value = float(statistic(a, b)[0])
    if not math.isfinite(value):
        return None
    return min(max(value, -1.0), 1.0)


def pearson(a, b):
    a, b = _flat_pair(a, b)
    return _correlation(stats.pearsonr, a, b)


def spearman(a, b):
    a, b = _flat_pair(a, b)
    return _correlation(stats.spearmanr, a, b)


def top_pixels(values, fraction=TOP_FRACTION):
    """
    Indices of the ``ceil(fraction * n)`` largest values (at least one).

    Ties are broken by pixel index so the set is deterministic.
    """
    values = np.asarray(values).ravel()
    count = max(1, math.ceil(fraction * values.size))
    order = np.argsort(-values, kind="stable")
    return set(order[:count].tolist())


def jaccard_top(a, b, fraction=TOP_FRACTION):
    a, b = _flat_pair(a, b)
    left = top_pixels(a, fraction)
    right = top_pixels(b, fraction)
    return len(left & right) / len(left | right)


def compare_masks(a, b, fraction=TOP_FRACTION):
    """
    Compare two masks pixel by pixel.

    Args:
        a (SaliencyMask | numpy.ndarray): First (H, W) mask
        b (SaliencyMask | numpy.ndarray): Second mask of the same shape
        fraction (float): Share of pixels counted as "top" for the overlap

    Returns:
        MaskSimilarity: Correlations and top-pixel overlap

    Raises:
        ShapeError: If the masks differ in shape
    """
    flat_a, flat_b = _flat_pair(a, b)
    if _is_constant(flat_a) or _is_constant(flat_b):
        logger.warning("constant mask; correlations are undefined")
    return MaskSimilarity(
        pearson=_correlation(stats.pearsonr, flat_a, flat_b),
        spearman=_correlation(stats.spearmanr, flat_a, flat_b),
        jaccard_top5=jaccard_top(flat_a, flat_b, fraction),
        top_fraction=fraction,
        pixels=int(flat_a.size),
    )

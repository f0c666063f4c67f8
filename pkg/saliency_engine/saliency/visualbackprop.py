"""
VisualBackProp saliency masks.

The post-ReLU feature maps of every convolutional stage are averaged over
channels. Starting from the deepest stage, the current mask is scaled up with
an all-ones transposed convolution using that stage's kernel and stride, then
multiplied pointwise by the averaged map of the stage below. After the first
stage the mask is scaled up once more to input resolution and normalized to
[0, 1]. Only the forward pass that produced the prediction is used; no extra
forward or backward passes run.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import GeometryError, SaliencyError
from .inference import forward
from .tensor import ACCUMULATOR, as_tensor, channel_mean, normalize_unit_interval, pointwise_multiply

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SaliencyMask:
    """
    Attributes:
        values (numpy.ndarray): (H, W) mask in [0, 1] at input resolution
        raw (numpy.ndarray): The same mask before normalization
        intermediates (tuple | None): Per-stage intermediate masks in network
            order (stage 1 first), kept only on request and never renormalized
        averaged (tuple | None): Channel-averaged feature map of every stage,
            kept alongside the intermediates
    """

    values: np.ndarray
    raw: np.ndarray
    intermediates: tuple = None
    averaged: tuple = None

    @property
    def shape(self):
        return self.values.shape


def deconv_unit(feature_map, kernel, stride, target):
    """
    Transposed convolution with all weights 1 and bias 0.

    Every source value is spread over its kernel footprint; overlapping
    footprints add up. The full output of size ((h-1)*sh + m, (w-1)*sw + r)
    is zero-padded on the bottom and right to ``target``.

    Args:
        feature_map (numpy.ndarray): (h, w) map to scale up
        kernel (tuple[int, int]): (m, r) of the convolution being inverted
        stride (tuple[int, int]): (sh, sw) of the convolution being inverted
        target (tuple[int, int]): (H, W) output size

    Returns:
        numpy.ndarray: (H, W) map

    Raises:
        GeometryError: If the full transposed output does not fit in ``target``
    """
    source = np.asarray(feature_map, dtype=ACCUMULATOR)
    if source.ndim != 2:
        raise GeometryError(f"deconv_unit expects a 2-d map, got shape {source.shape}")
    h, w = source.shape
    m, r = kernel
    sh, sw = stride
    full_h = (h - 1) * sh + m
    full_w = (w - 1) * sw + r
    target_h, target_w = target
    if full_h > target_h or full_w > target_w:
        raise GeometryError(
            f"transposed output {full_h}x{full_w} does not fit target {target_h}x{target_w}"
        )
    out = np.zeros((target_h, target_w), dtype=ACCUMULATOR)
    for u in range(m):
        for v in range(r):
            out[u:u + (h - 1) * sh + 1:sh, v:v + (w - 1) * sw + 1:sw] += source
    return as_tensor(out)


def mask_from_trace(trace, keep_intermediates=False):
    """
    Build the saliency mask from an existing activation trace.

    Args:
        trace (ActivationTrace): Trace recorded by ``forward``
        keep_intermediates (bool): Keep per-stage intermediate masks

    Returns:
        SaliencyMask: Normalized mask at input resolution

    Raises:
        SaliencyError: If the trace has no convolutional stages
    """
    stages = trace.stages
    if not stages:
        raise SaliencyError("visualbackprop needs at least one convolutional stage")

    averaged = [channel_mean(stage.post_relu) for stage in stages]
    mask = averaged[-1]
    intermediates = [mask]
    for level in range(len(stages) - 2, -1, -1):
        deeper = stages[level + 1]
        scaled = deconv_unit(mask, deeper.conv_kernel, deeper.conv_stride, averaged[level].shape)
        mask = pointwise_multiply(averaged[level], scaled)
        intermediates.append(mask)

    _, height, width = trace.input_shape
    raw = deconv_unit(mask, stages[0].conv_kernel, stages[0].conv_stride, (height, width))
    values = normalize_unit_interval(raw)
    if not np.any(values):
        logger.warning("visualbackprop produced an all-zero mask")

    if not keep_intermediates:
        return SaliencyMask(values=values, raw=raw)
    return SaliencyMask(
        values=values,
        raw=raw,
        intermediates=tuple(reversed(intermediates)),
        averaged=tuple(averaged),
    )


def visualbackprop(model, x, keep_intermediates=False):
    """
    Compute the VisualBackProp mask of ``model`` for input ``x``.

    Runs exactly one forward pass. Fully-connected layers and batch
    normalization do not take part in the mask; only convolution geometry
    drives the scaling-up steps.

    Args:
        model (Model): Validated model
        x (numpy.ndarray): Input of shape ``model.input_shape``
        keep_intermediates (bool): Keep per-stage intermediate masks

    Returns:
        SaliencyMask: Normalized mask with shape equal to the input's (H, W)
    """
    result = forward(model, x)
    return mask_from_trace(result.trace, keep_intermediates=keep_intermediates)

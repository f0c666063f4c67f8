"""
Layer-wise relevance propagation with the epsilon rule.

Relevance starts at one output neuron, equal to its activation, and is
redistributed layer by layer towards the input. For a linear map
``z_j = sum_i x_i w_ij + b_j`` the rule is

    R_i = sum_j x_i w_ij / (z_j + eps * sign(z_j)) * R_j

with sign(0) = +1. The bias share stays in the stabilized denominator and is
not handed to the inputs. Convolutions use their unrolled (im2col) structure,
batch normalization is a per-channel affine map under the same rule, ReLU
passes relevance through unchanged and Flatten only reshapes it.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import SaliencyError
from .inference import forward, im2col
from .layers import BatchNorm, Conv2d, Flatten, FullyConnected, ReLU
from .tensor import ACCUMULATOR, as_tensor, normalize_unit_interval
from .visualbackprop import SaliencyMask

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 100.0


@dataclass(frozen=True)
class LrpConfig:
    """
    Attributes:
        epsilon (float): Non-negative stabilizer
        output_index (int | None): Output neuron to explain; None picks 0 for
            single-output models and the arg-max output otherwise
    """

    epsilon: float = DEFAULT_EPSILON
    output_index: Optional[int] = None

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise SaliencyError(f"epsilon must be non-negative, got {self.epsilon}")

    def resolve_output_index(self, output):
        if self.output_index is None:
            return 0 if output.size == 1 else int(np.argmax(output))
        if not 0 <= self.output_index < output.size:
            raise SaliencyError(f"output index {self.output_index} out of range for {output.size} outputs")
        return int(self.output_index)


@dataclass(frozen=True)
class LrpResult:
    """
    Attributes:
        relevance (numpy.ndarray): Relevance of every input value, input shape
        raw (numpy.ndarray): (H, W) relevance summed over input channels
        mask (SaliencyMask): ``raw`` normalized to [0, 1]
        output_index (int): The explained output neuron
    """

    relevance: np.ndarray
    raw: np.ndarray
    mask: SaliencyMask
    output_index: int


def _stabilized_share(relevance, z, epsilon):
    sign = np.where(z >= 0, 1.0, -1.0)
    denominator = z + epsilon * sign
    share = np.zeros_like(z)
    np.divide(relevance, denominator, out=share, where=denominator != 0)
    return share


def col2im(cols, input_shape, kernel, stride):
    """Scatter-add (H'*W', C*m*r) rows back onto a (C, H, W) grid."""
    channels, height, width = input_shape
    m, r = kernel
    sh, sw = stride
    out_h = (height - m) // sh + 1
    out_w = (width - r) // sw + 1
    patches = cols.reshape(out_h, out_w, channels, m, r).transpose(2, 3, 4, 0, 1)
    image = np.zeros(input_shape, dtype=ACCUMULATOR)
    for u in range(m):
        for v in range(r):
            image[:, u:u + sh * (out_h - 1) + 1:sh, v:v + sw * (out_w - 1) + 1:sw] += patches[:, u, v]
    return image


def _conv_relevance(layer, x, relevance, epsilon):
    cols, _ = im2col(x, layer.kernel, layer.stride)
    kernels = layer.weights.reshape(layer.out_channels, -1).astype(ACCUMULATOR)
    z = cols @ kernels.T + layer.bias.astype(ACCUMULATOR)
    share = _stabilized_share(relevance.reshape(layer.out_channels, -1).T, z, epsilon)
    contribution = col2im(share @ kernels, x.shape, layer.kernel, layer.stride)
    return x * contribution


def _fc_relevance(layer, x, relevance, epsilon):
    weights = layer.weights.astype(ACCUMULATOR)
    z = weights @ x + layer.bias.astype(ACCUMULATOR)
    share = _stabilized_share(relevance, z, epsilon)
    return x * (weights.T @ share)


def _batchnorm_relevance(layer, x, relevance, epsilon):
    scale, shift = layer.scale_and_shift()
    flat = x.reshape(layer.channels, -1)
    z = flat * scale[:, None] + shift[:, None]
    share = _stabilized_share(relevance.reshape(layer.channels, -1), z, epsilon)
    return (flat * scale[:, None] * share).reshape(x.shape)


def relevance_from_forward(model, result, config):
    """
    Propagate relevance through a model given a recorded forward pass.

    Args:
        model (Model): The model that produced ``result``
        result (ForwardResult): Forward pass run with ``record_inputs=True``
        config (LrpConfig): Rule parameters

    Returns:
        LrpResult: Input relevance, its channel sum and the normalized mask
    """
    if result.layer_inputs is None:
        raise SaliencyError("relevance propagation needs a forward pass with recorded layer inputs")
    output = np.asarray(result.output)
    index = config.resolve_output_index(output)

    relevance = np.zeros(output.size, dtype=ACCUMULATOR)
    relevance[index] = output[index]
    relevance = relevance.reshape(model.output_shape)

    for layer, layer_input in zip(reversed(model.layers), reversed(result.layer_inputs)):
        x = np.asarray(layer_input, dtype=ACCUMULATOR)
        if isinstance(layer, Conv2d):
            relevance = _conv_relevance(layer, x, relevance, config.epsilon)
        elif isinstance(layer, FullyConnected):
            relevance = _fc_relevance(layer, x, relevance, config.epsilon)
        elif isinstance(layer, BatchNorm):
            relevance = _batchnorm_relevance(layer, x, relevance, config.epsilon)
        elif isinstance(layer, Flatten):
            relevance = relevance.reshape(x.shape)
        elif not isinstance(layer, ReLU):
            raise TypeError(f"unknown layer type {type(layer).__name__}")

    raw = relevance.sum(axis=0)
    logger.debug("lrp output %d: activation %.6g, total input relevance %.6g", index, output[index], raw.sum())
    raw = as_tensor(raw)
    mask = SaliencyMask(values=normalize_unit_interval(raw), raw=raw)
    return LrpResult(relevance=as_tensor(relevance), raw=raw, mask=mask, output_index=index)


def lrp_relevance(model, x, config=None):
    """
    Compute the epsilon-rule relevance map of ``model`` for input ``x``.

    Args:
        model (Model): Validated model
        x (numpy.ndarray): Input of shape ``model.input_shape``
        config (LrpConfig | None): Rule parameters, defaults to epsilon 100

    Returns:
        LrpResult: Relevance maps and normalized mask

    Raises:
        SaliencyError: If the output index is out of range
    """
    config = config or LrpConfig()
    result = forward(model, x, record_inputs=True)
    return relevance_from_forward(model, result, config)

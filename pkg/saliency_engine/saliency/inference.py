"""
Deterministic forward pass.

``forward`` runs a Model on one input and returns the network output together
with the ActivationTrace consumed by VisualBackProp: one stage per ReLU that
follows a Conv2d, holding the post-ReLU feature maps and the kernel/stride of
the producing convolution. Convolutions are computed as an im2col product with
columns ordered channel-major, then kernel row, then kernel column, and with
float64 accumulation, so repeated runs on one platform are bit-identical.
"""

import logging
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import GeometryError, ShapeError
from .layers import BatchNorm, Conv2d, Flatten, FullyConnected, ReLU
from .tensor import ACCUMULATOR, as_tensor

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TraceStage:
    post_relu: np.ndarray
    conv_kernel: tuple
    conv_stride: tuple
    layer_index: int


@dataclass(frozen=True)
class ActivationTrace:
    """
    Post-ReLU feature maps of every convolutional stage, in network order.

    Attributes:
        stages (tuple[TraceStage, ...]): One entry per ReLU following a Conv2d
        input_shape (tuple[int, int, int]): (C, H, W) of the traced input
    """

    stages: tuple
    input_shape: tuple

    def __len__(self):
        return len(self.stages)


@dataclass(frozen=True)
class ForwardResult:
    """
    Attributes:
        output (numpy.ndarray): Network output, flattened to a vector
        trace (ActivationTrace): Convolutional stage activations
        layer_inputs (tuple | None): Input tensor of every layer, recorded only
            when requested (relevance propagation needs them)
    """

    output: np.ndarray
    trace: ActivationTrace
    layer_inputs: tuple = None


def im2col(x, kernel, stride):
    """
    Unroll every kernel placement of a (C, H, W) tensor into one row.

    Returns:
        numpy.ndarray: (H' * W', C * m * r) matrix, columns ordered (c, u, v)
        tuple[int, int]: Output spatial size (H', W')
    """
    channels, height, width = x.shape
    m, r = kernel
    sh, sw = stride
    if height < m or width < r:
        raise GeometryError(f"kernel {m}x{r} larger than input {height}x{width}")
    windows = sliding_window_view(x, (m, r), axis=(1, 2))[:, ::sh, ::sw]
    out_h, out_w = windows.shape[1], windows.shape[2]
    cols = windows.transpose(1, 2, 0, 3, 4).reshape(out_h * out_w, channels * m * r)
    return cols, (out_h, out_w)


def conv2d_forward(layer, x):
    """
    Valid convolution ``out[o,i,j] = bias[o] + sum w[o,c,u,v] * x[c, i*sh+u, j*sw+v]``.

    Args:
        layer (Conv2d): Convolution parameters
        x (numpy.ndarray): (Cin, H, W) input

    Returns:
        numpy.ndarray: (Cout, H', W') output

    Raises:
        ShapeError: If the input channel count does not match
        GeometryError: If the kernel is larger than the input
    """
    x = np.asarray(x)
    if x.ndim != 3 or x.shape[0] != layer.in_channels:
        raise ShapeError(f"conv expects ({layer.in_channels}, H, W) input, got {x.shape}")
    cols, (out_h, out_w) = im2col(x.astype(ACCUMULATOR), layer.kernel, layer.stride)
    kernels = layer.weights.reshape(layer.out_channels, -1).astype(ACCUMULATOR)
    out = cols @ kernels.T
    out += layer.bias.astype(ACCUMULATOR)
    return as_tensor(out.T.reshape(layer.out_channels, out_h, out_w))


def batchnorm_forward(layer, x):
    """
    Apply inference-mode batch normalization as a per-channel affine map.

    Args:
        layer (BatchNorm): Running statistics and affine parameters
        x (numpy.ndarray): Input whose first axis is the channel axis

    Returns:
        numpy.ndarray: Normalized tensor of the same shape

    Raises:
        ShapeError: If the channel count does not match
    """
    x = np.asarray(x)
    if x.ndim < 1 or x.shape[0] != layer.channels:
        raise ShapeError(f"batchnorm expects {layer.channels} channels, got shape {x.shape}")
    scale, shift = layer.scale_and_shift()
    flat = x.reshape(layer.channels, -1).astype(ACCUMULATOR)
    return as_tensor((flat * scale[:, None] + shift[:, None]).reshape(x.shape))


def relu_forward(x):
    """Clamp negative values to zero; the shape is unchanged."""
    return as_tensor(np.maximum(np.asarray(x), 0))


def fc_forward(layer, x):
    """
    Fully-connected layer ``out = W x + b``.

    Args:
        layer (FullyConnected): Weights (out_dim, in_dim) and bias
        x (numpy.ndarray): Vector of length in_dim

    Returns:
        numpy.ndarray: Vector of length out_dim

    Raises:
        ShapeError: If x is not a vector of in_dim values
    """
    x = np.asarray(x)
    if x.shape != (layer.in_dim,):
        raise ShapeError(f"fc expects a vector of {layer.in_dim}, got shape {x.shape}")
    out = layer.weights.astype(ACCUMULATOR) @ x.astype(ACCUMULATOR) + layer.bias.astype(ACCUMULATOR)
    return as_tensor(out)


def flatten_forward(x):
    return as_tensor(np.asarray(x).reshape(-1))


def layer_forward(layer, x):
    if isinstance(layer, Conv2d):
        return conv2d_forward(layer, x)
    if isinstance(layer, BatchNorm):
        return batchnorm_forward(layer, x)
    if isinstance(layer, ReLU):
        return relu_forward(x)
    if isinstance(layer, Flatten):
        return flatten_forward(x)
    if isinstance(layer, FullyConnected):
        return fc_forward(layer, x)
    raise TypeError(f"unknown layer type {type(layer).__name__}")


def forward(model, x, record_inputs=False):
    """
    Run the model on one input.

    Args:
        model (Model): Validated model
        x (numpy.ndarray): Input of shape ``model.input_shape``
        record_inputs (bool): Keep every layer's input for relevance propagation

    Returns:
        ForwardResult: Output vector, activation trace and optional layer inputs

    Raises:
        ShapeError: If ``x`` does not match the model input shape
    """
    x = as_tensor(x)
    if x.shape != model.input_shape:
        raise ShapeError(f"input shape {x.shape} does not match model input shape {model.input_shape}")

    stages = []
    inputs = [] if record_inputs else None
    pending_conv = None
    current = x
    for index, layer in enumerate(model.layers):
        if record_inputs:
            inputs.append(current)
        current = layer_forward(layer, current)
        if isinstance(layer, Conv2d):
            pending_conv = (index, layer)
        elif isinstance(layer, ReLU) and pending_conv is not None:
            conv_index, conv = pending_conv
            stages.append(TraceStage(
                post_relu=current,
                conv_kernel=conv.kernel,
                conv_stride=conv.stride,
                layer_index=conv_index,
            ))
            pending_conv = None
        logger.debug("layer %d %s -> %s", index, layer.kind, current.shape)

    trace = ActivationTrace(stages=tuple(stages), input_shape=model.input_shape)
    return ForwardResult(
        output=as_tensor(np.asarray(current).reshape(-1)),
        trace=trace,
        layer_inputs=tuple(inputs) if record_inputs else None,
    )

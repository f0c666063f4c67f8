"""
Layer and model data model.

A Model is an ordered tuple of layer specifications plus the (C, H, W) input
shape. Construction validates every layer and the whole shape chain, so a
Model instance that exists is always consistent. All parameter arrays are
read-only float32 tensors and a Model is safe to share across threads.

Classes:
    Conv2d: Valid (unpadded) 2-d convolution with per-output-channel bias
    BatchNorm: Per-channel affine normalization with running statistics
    ReLU: Elementwise rectifier
    Flatten: Reshape a (C, H, W) stack into a vector
    FullyConnected: Dense layer ``W @ x + b``
    Model: Validated layer sequence
"""

from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

from .exceptions import ManifestError, SaliencyError, ShapeError
from .tensor import as_tensor


def conv_output_extent(size, kernel, stride):
    """Spatial extent after a valid convolution: floor((size - kernel) / stride) + 1."""
    if size < kernel:
        raise ShapeError(f"kernel extent {kernel} larger than input extent {size}")
    return (size - kernel) // stride + 1


def _parameter(values, shape, what):
    try:
        return as_tensor(values, shape=shape)
    except SaliencyError as exc:
        raise ManifestError(f"{what}: {exc}") from exc


@dataclass(frozen=True, eq=False)
class Conv2d:
    in_channels: int
    out_channels: int
    kernel: tuple
    stride: tuple
    weights: np.ndarray = field(repr=False)
    bias: np.ndarray = field(repr=False)

    kind: ClassVar[str] = "conv2d"

    def __post_init__(self):
        kernel = tuple(int(k) for k in self.kernel)
        stride = tuple(int(s) for s in self.stride)
        if len(kernel) != 2 or min(kernel) < 1:
            raise ManifestError(f"conv kernel must be two positive extents, got {self.kernel}")
        if len(stride) != 2 or min(stride) < 1:
            raise ManifestError(f"conv stride must be two positive extents, got {self.stride}")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ManifestError("conv channel counts must be positive")
        shape = (self.out_channels, self.in_channels, *kernel)
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "stride", stride)
        object.__setattr__(self, "weights", _parameter(self.weights, shape, "conv weights"))
        object.__setattr__(self, "bias", _parameter(self.bias, (self.out_channels,), "conv bias"))

    def output_shape(self, input_shape):
        if len(input_shape) != 3 or input_shape[0] != self.in_channels:
            raise ShapeError(f"conv expects ({self.in_channels}, H, W) input, got {tuple(input_shape)}")
        _, height, width = input_shape
        return (
            self.out_channels,
            conv_output_extent(height, self.kernel[0], self.stride[0]),
            conv_output_extent(width, self.kernel[1], self.stride[1]),
        )

    def parameters(self):
        return {"weights": self.weights, "bias": self.bias}


@dataclass(frozen=True, eq=False)
class BatchNorm:
    channels: int
    gamma: np.ndarray = field(repr=False)
    beta: np.ndarray = field(repr=False)
    running_mean: np.ndarray = field(repr=False)
    running_var: np.ndarray = field(repr=False)
    eps: float = 1e-5

    kind: ClassVar[str] = "batchnorm"

    def __post_init__(self):
        shape = (self.channels,)
        for name in ("gamma", "beta", "running_mean", "running_var"):
            object.__setattr__(self, name, _parameter(getattr(self, name), shape, f"batchnorm {name}"))
        if np.any(self.running_var < 0):
            raise ManifestError("batchnorm running_var must be non-negative")
        # eps is stored as float32 in the blob, keep the in-memory value identical
        eps = float(np.float32(self.eps))
        if not eps > 0:
            raise ManifestError("batchnorm eps must be positive")
        object.__setattr__(self, "eps", eps)

    def output_shape(self, input_shape):
        if len(input_shape) < 1 or input_shape[0] != self.channels:
            raise ShapeError(f"batchnorm expects {self.channels} channels, got shape {tuple(input_shape)}")
        return tuple(input_shape)

    def scale_and_shift(self):
        """Fold the layer into ``y = scale * x + shift`` per channel (float64)."""
        scale = self.gamma.astype(np.float64) / np.sqrt(self.running_var.astype(np.float64) + self.eps)
        shift = self.beta.astype(np.float64) - scale * self.running_mean.astype(np.float64)
        return scale, shift

    def parameters(self):
        return {
            "gamma": self.gamma,
            "beta": self.beta,
            "running_mean": self.running_mean,
            "running_var": self.running_var,
        }


@dataclass(frozen=True)
class ReLU:
    kind: ClassVar[str] = "relu"

    def output_shape(self, input_shape):
        return tuple(input_shape)

    def parameters(self):
        return {}


@dataclass(frozen=True)
class Flatten:
    kind: ClassVar[str] = "flatten"

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def parameters(self):
        return {}


@dataclass(frozen=True, eq=False)
class FullyConnected:
    in_dim: int
    out_dim: int
    weights: np.ndarray = field(repr=False)
    bias: np.ndarray = field(repr=False)

    kind: ClassVar[str] = "fc"

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ManifestError("fc dimensions must be positive")
        object.__setattr__(self, "weights", _parameter(self.weights, (self.out_dim, self.in_dim), "fc weights"))
        object.__setattr__(self, "bias", _parameter(self.bias, (self.out_dim,), "fc bias"))

    def output_shape(self, input_shape):
        if tuple(input_shape) != (self.in_dim,):
            raise ShapeError(f"fc expects a vector of {self.in_dim}, got shape {tuple(input_shape)}")
        return (self.out_dim,)

    def parameters(self):
        return {"weights": self.weights, "bias": self.bias}


LAYER_TYPES = {cls.kind: cls for cls in (Conv2d, BatchNorm, ReLU, Flatten, FullyConnected)}


@dataclass(frozen=True, eq=False)
class Model:
    """
    Validated, immutable network description.

    Attributes:
        layers (tuple): Layer specifications in network order
        input_shape (tuple[int, int, int]): (C, H, W) of the expected input
        shapes (tuple): Output shape of every layer, computed at construction

    Raises:
        ManifestError: If the shape chain breaks or a Conv2d is not followed
            by a ReLU before the next Conv2d
    """

    layers: tuple
    input_shape: tuple
    shapes: tuple = field(init=False, repr=False)

    def __post_init__(self):
        layers = tuple(self.layers)
        input_shape = tuple(int(extent) for extent in self.input_shape)
        if len(input_shape) != 3 or min(input_shape) < 1:
            raise ManifestError(f"input_shape must be three positive extents, got {self.input_shape}")
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "input_shape", input_shape)

        shapes = []
        current = input_shape
        for index, layer in enumerate(layers):
            try:
                current = layer.output_shape(current)
            except ShapeError as exc:
                raise ManifestError(str(exc), layer_index=index) from exc
            shapes.append(current)
        object.__setattr__(self, "shapes", tuple(shapes))
        self._check_relu_after_conv()

    def _check_relu_after_conv(self):
        pending = None
        for index, layer in enumerate(self.layers):
            if isinstance(layer, Conv2d):
                if pending is not None:
                    raise ManifestError("conv2d is not followed by a relu before the next conv2d", layer_index=pending)
                pending = index
            elif isinstance(layer, ReLU):
                pending = None
        if pending is not None:
            raise ManifestError("conv2d is never followed by a relu", layer_index=pending)

    def input_shape_of(self, index):
        return self.input_shape if index == 0 else self.shapes[index - 1]

    @property
    def output_shape(self):
        return self.shapes[-1] if self.shapes else self.input_shape

    @property
    def output_dim(self):
        return int(np.prod(self.output_shape))

    def conv_layers(self):
        return [layer for layer in self.layers if isinstance(layer, Conv2d)]

    def without_batchnorm(self):
        """Return the same network with every BatchNorm layer removed."""
        return Model(layers=[layer for layer in self.layers if not isinstance(layer, BatchNorm)],
                     input_shape=self.input_shape)

    def conv_trunk(self):
        """Return the convolutional part of the network, cut before the first Flatten or FC."""
        trunk = []
        for layer in self.layers:
            if isinstance(layer, (Flatten, FullyConnected)):
                break
            trunk.append(layer)
        return Model(layers=trunk, input_shape=self.input_shape)

    def same_as(self, other):
        """Bit-exact comparison of structure and parameters."""
        if self.input_shape != other.input_shape or len(self.layers) != len(other.layers):
            return False
        for mine, theirs in zip(self.layers, other.layers):
            if type(mine) is not type(theirs):
                return False
            if isinstance(mine, Conv2d) and (mine.kernel, mine.stride) != (theirs.kernel, theirs.stride):
                return False
            if isinstance(mine, BatchNorm) and mine.eps != theirs.eps:
                return False
            for name, values in mine.parameters().items():
                if values.tobytes() != theirs.parameters()[name].tobytes():
                    return False
        return True

    def summary(self):
        """Rows describing each layer, used by the web surface and logs."""
        rows = []
        for index, layer in enumerate(self.layers):
            row = {
                "index": index,
                "kind": layer.kind,
                "input_shape": self.input_shape_of(index),
                "output_shape": self.shapes[index],
            }
            if isinstance(layer, Conv2d):
                row["kernel"] = layer.kernel
                row["stride"] = layer.stride
            rows.append(row)
        return rows

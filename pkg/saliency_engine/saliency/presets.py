"""
Deterministic preset architectures.

Presets reproduce the layer structure of the steering-angle regressors
(``netsvf``, ``nethvf``) and the traffic-sign classifier (``gtsdb``), plus a
``tiny`` two-stage network small enough for exhaustive path enumeration.
Every convolution is preceded by batch normalization and followed by a ReLU;
spatial sizes follow the valid-convolution formula from the input shape.

Weights are drawn from a splitmix64 stream keyed by (seed, layer index,
parameter index) and mapped to U[-0.1, 0.1]. Biases are 0.01 and batch-norm
layers are identities (gamma 1, beta 0, mean 0, var 1), so a preset is a pure
function of its name and seed.
"""

import numpy as np

from .exceptions import UnknownPresetError
from .layers import BatchNorm, Conv2d, Flatten, FullyConnected, Model, ReLU

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
WEIGHT_BOUND = 0.1
BIAS_VALUE = 0.01
BATCHNORM_EPS = 1e-5


def _mix64(z):
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK64
    return z ^ (z >> 31)


def stream_state(seed, layer_index, parameter_index):
    """Starting state of the splitmix64 stream for one parameter tensor."""
    state = _mix64((seed & MASK64) ^ GOLDEN_GAMMA)
    state = _mix64(state ^ (layer_index & MASK64))
    return _mix64(state ^ ((parameter_index + 1) * GOLDEN_GAMMA & MASK64))


def splitmix64(state, count):
    """
    First ``count`` outputs of a splitmix64 generator started at ``state``.

    Returns:
        numpy.ndarray: uint64 array of length ``count``
    """
    steps = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(state) + steps * np.uint64(GOLDEN_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return z


def uniform_weights(seed, layer_index, parameter_index, shape, bound=WEIGHT_BOUND):
    """
    Deterministic float32 weights uniform in [-bound, bound).

    Args:
        seed (int): Preset seed
        layer_index (int): Index of the layer in the model
        parameter_index (int): Index of the tensor within the layer
        shape (tuple): Shape of the returned tensor
        bound (float): Half-width of the interval

    Returns:
        numpy.ndarray: float32 tensor of ``shape``
    """
    count = int(np.prod(shape))
    raw = splitmix64(stream_state(seed, layer_index, parameter_index), count)
    unit = (raw >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
    return (-bound + 2.0 * bound * unit).astype(np.float32).reshape(shape)


class _Builder:
    """Accumulates layers while tracking the running shape and layer index."""

    def __init__(self, input_shape, seed):
        self.seed = seed
        self.shape = tuple(input_shape)
        self.input_shape = tuple(input_shape)
        self.layers = []

    def _add(self, layer):
        self.layers.append(layer)
        self.shape = layer.output_shape(self.shape)

    def conv_stage(self, out_channels, kernel=(3, 3), stride=(1, 1)):
        channels = self.shape[0]
        self._add(BatchNorm(
            channels=channels,
            gamma=np.ones(channels),
            beta=np.zeros(channels),
            running_mean=np.zeros(channels),
            running_var=np.ones(channels),
            eps=BATCHNORM_EPS,
        ))
        index = len(self.layers)
        self._add(Conv2d(
            in_channels=channels,
            out_channels=out_channels,
            kernel=kernel,
            stride=stride,
            weights=uniform_weights(self.seed, index, 0, (out_channels, channels, *kernel)),
            bias=np.full(out_channels, BIAS_VALUE),
        ))
        self._add(ReLU())

    def flatten(self):
        self._add(Flatten())

    def fc(self, out_dim, relu=True):
        in_dim = self.shape[0]
        index = len(self.layers)
        self._add(FullyConnected(
            in_dim=in_dim,
            out_dim=out_dim,
            weights=uniform_weights(self.seed, index, 0, (out_dim, in_dim)),
            bias=np.full(out_dim, BIAS_VALUE),
        ))
        if relu:
            self._add(ReLU())

    def build(self):
        return Model(layers=self.layers, input_shape=self.input_shape)


def _driving_net(input_shape, seed):
    builder = _Builder(input_shape, seed)
    for index, channels in enumerate((32, 32, 48, 48, 64, 64, 96, 96, 128, 128)):
        stride = (1, 1) if index % 2 == 0 else (2, 2)
        builder.conv_stage(channels, stride=stride)
    builder.flatten()
    builder.fc(1024)
    builder.fc(512)
    builder.fc(1, relu=False)
    return builder.build()


def _netsvf(seed):
    return _driving_net((1, 135, 640), seed)


def _nethvf(seed):
    return _driving_net((1, 135, 351), seed)


def _gtsdb(seed):
    builder = _Builder((3, 125, 125), seed)
    for index, channels in enumerate((16, 16, 24, 24, 32, 32, 48, 48)):
        stride = (1, 1) if index % 2 == 0 else (2, 2)
        builder.conv_stage(channels, stride=stride)
    builder.flatten()
    builder.fc(64)
    builder.fc(43, relu=False)
    return builder.build()


def _tiny(seed):
    builder = _Builder((1, 6, 6), seed)
    builder.conv_stage(2, kernel=(3, 3))
    builder.conv_stage(3, kernel=(2, 2))
    builder.flatten()
    builder.fc(8)
    builder.fc(1, relu=False)
    return builder.build()


PRESETS = {
    "netsvf": _netsvf,
    "nethvf": _nethvf,
    "gtsdb": _gtsdb,
    "tiny": _tiny,
}


def preset(name, seed=0):
    """
    Build a preset model.

    Args:
        name (str): One of ``netsvf``, ``nethvf``, ``gtsdb``, ``tiny``
        seed (int): 64-bit seed for the weight stream

    Returns:
        Model: Validated model

    Raises:
        UnknownPresetError: If ``name`` is not a known preset
    """
    try:
        builder = PRESETS[name]
    except KeyError:
        raise UnknownPresetError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}") from None
    return builder(int(seed))

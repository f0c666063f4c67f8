"""Builders shared by the saliency test modules."""

import numpy as np

from ..imaging import Image, encode_netpbm
from ..layers import Conv2d, Flatten, FullyConnected, Model, ReLU


def conv(weights, bias=None, stride=(1, 1)):
    weights = np.asarray(weights, dtype=np.float32)
    out_channels, in_channels, m, r = weights.shape
    if bias is None:
        bias = np.zeros(out_channels)
    return Conv2d(in_channels=in_channels, out_channels=out_channels, kernel=(m, r),
                  stride=stride, weights=weights, bias=bias)


def fc(weights, bias=None):
    weights = np.asarray(weights, dtype=np.float32)
    out_dim, in_dim = weights.shape
    if bias is None:
        bias = np.zeros(out_dim)
    return FullyConnected(in_dim=in_dim, out_dim=out_dim, weights=weights, bias=bias)


def conv_relu_model(input_shape, *convs):
    layers = []
    for layer in convs:
        layers += [layer, ReLU()]
    return Model(layers=layers, input_shape=input_shape)


def random_conv_net(rng, input_shape=(1, 6, 6), stages=((2, 3), (3, 2)), head=1,
                    low=-1.0, high=1.0, bias=0.0):
    """Conv+ReLU stages given as (out_channels, kernel side), then flatten and a linear head."""
    layers = []
    shape = input_shape
    for out_channels, side in stages:
        layer = conv(rng.uniform(low, high, size=(out_channels, shape[0], side, side)),
                     np.full(out_channels, bias))
        layers += [layer, ReLU()]
        shape = layer.output_shape(shape)
    flat = int(np.prod(shape))
    layers += [Flatten(), fc(rng.uniform(low, high, size=(head, flat)), np.full(head, bias))]
    return Model(layers=layers, input_shape=input_shape)


def netpbm_bytes(pixels):
    return encode_netpbm(Image(np.asarray(pixels, dtype=np.uint8)))


def write_netpbm(path, pixels):
    path.write_bytes(netpbm_bytes(pixels))
    return path

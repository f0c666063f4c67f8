"""
Dense tensor helpers for the saliency engine.

Tensors are plain numpy arrays with dtype float32, row-major layout and the
writeable flag cleared, so a tensor handed between modules behaves as an
immutable value. Reductions accumulate in float64 and round back to float32.

Shape conventions:
    (C, H, W): feature-map stacks and input images
    (H, W): single-channel maps and saliency masks
    (N,): vectors
"""

import numpy as np

from .exceptions import SaliencyError, ShapeError

DTYPE = np.float32
ACCUMULATOR = np.float64


def as_tensor(values, shape=None):
    """
    Build a read-only float32 tensor.

    Args:
        values (array-like): Source data
        shape (tuple[int, ...] | None): Optional shape to reshape to

    Returns:
        numpy.ndarray: Contiguous float32 array with the writeable flag cleared

    Raises:
        ShapeError: If the data does not fit ``shape`` or an extent is zero
        SaliencyError: If any value is NaN or infinite
    """
    array = np.array(values, dtype=DTYPE, order="C", copy=True)
    if shape is not None:
        shape = tuple(int(extent) for extent in shape)
        if int(np.prod(shape)) != array.size:
            raise ShapeError(f"cannot view {array.size} values as shape {shape}")
        array = array.reshape(shape)
    if array.ndim == 0 or any(extent < 1 for extent in array.shape):
        raise ShapeError(f"tensor extents must be positive, got {array.shape}")
    if not np.all(np.isfinite(array)):
        raise SaliencyError("tensor contains non-finite values")
    array.flags.writeable = False
    return array


def _require_rank(t, rank, name):
    if t.ndim != rank:
        raise ShapeError(f"{name} expects a rank-{rank} tensor, got shape {t.shape}")


def channel_mean(t):
    """Average a (C, H, W) stack over channels into one (H, W) map."""
    t = np.asarray(t)
    _require_rank(t, 3, "channel_mean")
    return as_tensor(t.astype(ACCUMULATOR).mean(axis=0))


def pointwise_multiply(a, b):
    """
    Multiply two maps elementwise.

    Args:
        a (numpy.ndarray): First map
        b (numpy.ndarray): Second map of the same shape

    Returns:
        numpy.ndarray: Product map

    Raises:
        ShapeError: If the shapes differ
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"pointwise_multiply shape mismatch: {a.shape} vs {b.shape}")
    return as_tensor(a.astype(ACCUMULATOR) * b.astype(ACCUMULATOR))


def normalize_unit_interval(t):
    """
    Rescale a map affinely onto [0, 1].

    A constant map carries no saliency signal and normalizes to all zeros.

    Args:
        t (numpy.ndarray): Map of any shape

    Returns:
        numpy.ndarray: Tensor of the same shape with min 0 and max 1, or zeros
    """
    values = np.asarray(t, dtype=ACCUMULATOR)
    low = values.min()
    high = values.max()
    if not high > low:
        return as_tensor(np.zeros(values.shape))
    scaled = (values - low) / (high - low)
    return as_tensor(np.clip(scaled, 0.0, 1.0))

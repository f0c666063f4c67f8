"""
Bit-exact model serialization.

A saved model is a JSON manifest describing the layer structure plus a raw
weight blob of little-endian IEEE-754 float32 values. Offsets in the manifest
are element indices into the blob. Conv weights are ordered [out][in][kh][kw]
and FC weights [out][in], which is numpy's C order for the in-memory arrays.

Manifest layout::

    {
      "format_version": 1,
      "input_shape": [C, H, W],
      "layers": [
        {"kind": "conv2d", "in": .., "out": .., "kernel": [m, r], "stride": [sh, sw],
         "weights_offset": .., "bias_offset": .., "output_shape": [..]},
        {"kind": "batchnorm", "channels": .., "eps": .., "gamma_offset": ..,
         "beta_offset": .., "mean_offset": .., "var_offset": .., "output_shape": [..]},
        {"kind": "relu", "output_shape": [..]},
        {"kind": "flatten", "output_shape": [..]},
        {"kind": "fc", "in": .., "out": .., "weights_offset": .., "bias_offset": ..,
         "output_shape": [..]}
      ],
      "weights_file": "weights.bin",
      "weights_sha256": "<hex>"
    }

``output_shape`` is optional on load; when present it must equal the shape
computed by the valid-convolution formula.
"""

import hashlib
import json
import logging
from pathlib import Path

import numpy as np

from .exceptions import ChecksumError, ManifestError, SaliencyError
from .layers import BatchNorm, Conv2d, Flatten, FullyConnected, Model, ReLU

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
BLOB_DTYPE = np.dtype("<f4")
DEFAULT_WEIGHTS_FILE = "weights.bin"


class _BlobWriter:
    """Append parameter arrays to one flat buffer and hand out element offsets."""

    def __init__(self):
        self.chunks = []
        self.size = 0

    def add(self, values):
        offset = self.size
        flat = np.ascontiguousarray(values, dtype=BLOB_DTYPE).ravel()
        self.chunks.append(flat)
        self.size += flat.size
        return offset

    def tobytes(self):
        if not self.chunks:
            return b""
        return np.concatenate(self.chunks).tobytes()


def _layer_entry(layer, blob):
    if isinstance(layer, Conv2d):
        return {
            "kind": "conv2d",
            "in": layer.in_channels,
            "out": layer.out_channels,
            "kernel": list(layer.kernel),
            "stride": list(layer.stride),
            "weights_offset": blob.add(layer.weights),
            "bias_offset": blob.add(layer.bias),
        }
    if isinstance(layer, BatchNorm):
        return {
            "kind": "batchnorm",
            "channels": layer.channels,
            "eps": layer.eps,
            "gamma_offset": blob.add(layer.gamma),
            "beta_offset": blob.add(layer.beta),
            "mean_offset": blob.add(layer.running_mean),
            "var_offset": blob.add(layer.running_var),
        }
    if isinstance(layer, FullyConnected):
        return {
            "kind": "fc",
            "in": layer.in_dim,
            "out": layer.out_dim,
            "weights_offset": blob.add(layer.weights),
            "bias_offset": blob.add(layer.bias),
        }
    return {"kind": layer.kind}


def save_model(model, manifest_path):
    """
    Write ``model`` as a manifest plus a weight blob next to it.

    Two saves of the same model produce byte-identical files.

    Args:
        model (Model): Validated model
        manifest_path (str | Path): Destination of the JSON manifest; the blob
            is written to ``weights.bin`` in the same directory

    Raises:
        OSError: If either file cannot be written
    """
    manifest_path = Path(manifest_path)
    blob = _BlobWriter()
    layers = []
    for layer, shape in zip(model.layers, model.shapes):
        entry = _layer_entry(layer, blob)
        entry["output_shape"] = list(shape)
        layers.append(entry)

    payload = blob.tobytes()
    manifest = {
        "format_version": FORMAT_VERSION,
        "input_shape": list(model.input_shape),
        "layers": layers,
        "weights_file": DEFAULT_WEIGHTS_FILE,
        "weights_sha256": hashlib.sha256(payload).hexdigest(),
    }
    (manifest_path.parent / DEFAULT_WEIGHTS_FILE).write_bytes(payload)
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    logger.info("Saved model with %d layers to %s (%d bytes of weights)", len(layers), manifest_path, len(payload))


def _blob_extent(entry):
    """Number of blob elements a manifest entry reaches up to (exclusive end)."""
    kind = entry["kind"]
    if kind == "conv2d":
        m, r = entry["kernel"]
        return max(
            entry["weights_offset"] + entry["out"] * entry["in"] * m * r,
            entry["bias_offset"] + entry["out"],
        )
    if kind == "batchnorm":
        channels = entry["channels"]
        return max(entry[key] + channels for key in ("gamma_offset", "beta_offset", "mean_offset", "var_offset"))
    if kind == "fc":
        return max(entry["weights_offset"] + entry["out"] * entry["in"], entry["bias_offset"] + entry["out"])
    return 0


def _take(values, offset, count):
    if offset < 0:
        raise ManifestError(f"negative blob offset {offset}")
    if offset + count > values.size:
        raise ManifestError(f"blob range [{offset}, {offset + count}) exceeds {values.size} values")
    return values[offset:offset + count]



def _build_layer(entry, values):
    kind = entry["kind"]
    if kind == "conv2d":
        m, r = entry["kernel"]
        count = entry["out"] * entry["in"] * m * r
        return Conv2d(
            in_channels=entry["in"],
            out_channels=entry["out"],
            kernel=(m, r),
            stride=tuple(entry["stride"]),
            weights=_take(values, entry["weights_offset"], count),
            bias=_take(values, entry["bias_offset"], entry["out"]),
        )
    if kind == "batchnorm":
        channels = entry["channels"]
        return BatchNorm(
            channels=channels,
            gamma=_take(values, entry["gamma_offset"], channels),
            beta=_take(values, entry["beta_offset"], channels),
            running_mean=_take(values, entry["mean_offset"], channels),
            running_var=_take(values, entry["var_offset"], channels),
            eps=entry["eps"],
        )
    if kind == "relu":
        return ReLU()
    if kind == "flatten":
        return Flatten()
    if kind == "fc":
        return FullyConnected(
            in_dim=entry["in"],
            out_dim=entry["out"],
            weights=_take(values, entry["weights_offset"], entry["out"] * entry["in"]),
            bias=_take(values, entry["bias_offset"], entry["out"]),
        )
    raise ManifestError(f"unknown layer kind {kind!r}")


def _read_manifest(manifest_path):
    try:
        text = manifest_path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ManifestError(f"manifest not found: {manifest_path}") from exc
    try:
        manifest = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ManifestError(f"unsupported format_version {manifest.get('format_version')!r}")
    for key in ("input_shape", "layers", "weights_file", "weights_sha256"):
        if key not in manifest:
            raise ManifestError(f"manifest is missing {key!r}")
    return manifest


def load_model(manifest_path):
    """
    Load and validate a model written by ``save_model``.

    Args:
        manifest_path (str | Path): Path to the JSON manifest

    Returns:
        Model: Validated model with parameters read bit-exactly from the blob

    Raises:
        ManifestError: Missing files, blob size mismatch, malformed entries or
            a broken shape chain (with the offending layer index)
        ChecksumError: If the blob digest differs from ``weights_sha256``
    """
    manifest_path = Path(manifest_path)
    manifest = _read_manifest(manifest_path)
    entries = manifest["layers"]

    blob_path = manifest_path.parent / manifest["weights_file"]
    try:
        payload = blob_path.read_bytes()
    except FileNotFoundError as exc:
        raise ManifestError(f"weight blob not found: {blob_path}") from exc

    try:
        expected_elements = max((_blob_extent(entry) for entry in entries), default=0)
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"malformed layer entry: {exc}") from exc
    expected_bytes = expected_elements * BLOB_DTYPE.itemsize
    if len(payload) != expected_bytes:
        raise ManifestError(
            f"weight blob {blob_path.name} has {len(payload)} bytes, expected {expected_bytes}"
        )
    digest = hashlib.sha256(payload).hexdigest()
    if digest != manifest["weights_sha256"]:
        raise ChecksumError(f"weight blob checksum mismatch: manifest {manifest['weights_sha256']}, actual {digest}")

    values = np.frombuffer(payload, dtype=BLOB_DTYPE).astype(np.float32)
    layers = []
    for index, entry in enumerate(entries):
        try:
            layers.append(_build_layer(entry, values))
        except ManifestError as exc:
            if exc.layer_index is not None:
                raise
            raise ManifestError(str(exc), layer_index=index) from exc
        except (KeyError, TypeError, ValueError, SaliencyError) as exc:
            raise ManifestError(f"malformed layer entry: {exc}", layer_index=index) from exc

    model = Model(layers=layers, input_shape=manifest["input_shape"])
    for index, (entry, computed) in enumerate(zip(entries, model.shapes)):
        declared = entry.get("output_shape")
        if declared is not None and tuple(declared) != tuple(computed):
            raise ManifestError(
                f"declared output shape {tuple(declared)} does not match computed {tuple(computed)}",
                layer_index=index,
            )
    logger.debug("Loaded model from %s: %d layers, input %s", manifest_path, len(layers), model.input_shape)
    return model

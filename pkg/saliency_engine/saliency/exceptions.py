"""
Exceptions raised by the saliency engine.

Every engine failure derives from SaliencyError so that management commands
and views can translate the whole family into a CommandError or a user-facing
message in one place.

Classes:
    SaliencyError: Base class for all engine errors
    ShapeError: Tensor or layer shapes do not agree
    GeometryError: Kernel/stride/target geometry cannot be satisfied
    ManifestError: Model manifest or weight blob is inconsistent
    ChecksumError: Weight blob digest does not match the manifest
    UnknownPresetError: Requested preset name does not exist
    UnsupportedLayerError: Layer kind not supported by an operation
    PathCapExceededError: Flow-graph path count is above the enumeration cap
    DegenerateFlowError: Live flow node with zero input flow
    ImageFormatError: Netpbm payload cannot be read
"""


class SaliencyError(Exception):
    """Base class for all saliency engine errors."""


class ShapeError(SaliencyError):
    pass


class GeometryError(SaliencyError):
    pass


class ManifestError(SaliencyError):
    """
    Raised when a manifest, its weight blob, or the declared shape chain is invalid.

    Attributes:
        layer_index (int | None): Index of the offending layer, when known
    """

    def __init__(self, message, layer_index=None):
        if layer_index is not None:
            message = f"layer {layer_index}: {message}"
        super().__init__(message)
        self.layer_index = layer_index


class ChecksumError(ManifestError):
    pass


class UnknownPresetError(SaliencyError):
    pass


class UnsupportedLayerError(SaliencyError):
    pass


class PathCapExceededError(SaliencyError):
    pass


class DegenerateFlowError(SaliencyError):
    pass


class ImageFormatError(SaliencyError):
    pass

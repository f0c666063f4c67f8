"""
Image input/output and mask rendering.

Binary netpbm (P5 grayscale, P6 RGB, maxval 255) is the lossless exchange
format used by the commands and the tests. PNG output goes through Pillow and
is only used for viewing (web surface, ``.png`` output paths).

All 8-bit conversions round half up.
"""

import io
import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import PIL.Image

from .exceptions import ImageFormatError, ShapeError
from .tensor import ACCUMULATOR, as_tensor

logger = logging.getLogger(__name__)

MAXVAL = 255
MAGIC_CHANNELS = {b"P5": 1, b"P6": 3}
CHANNEL_MAGIC = {1: b"P5", 3: b"P6"}

# magic, width, height, maxval; '#' comments may sit between the tokens
_HEADER_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*(\S+)")


@dataclass(frozen=True)
class Image:
    """
    8-bit image, row-major top to bottom.

    Attributes:
        pixels (numpy.ndarray): uint8 array of shape (H, W) for grayscale or
            (H, W, 3) for RGB
    """

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.array(self.pixels, dtype=np.uint8, order="C")
        if pixels.ndim == 3 and pixels.shape[2] == 1:
            pixels = pixels[:, :, 0]
        if not (pixels.ndim == 2 or (pixels.ndim == 3 and pixels.shape[2] == 3)):
            raise ShapeError(f"image pixels must be (H, W) or (H, W, 3), got {pixels.shape}")
        if pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise ShapeError(f"image extents must be positive, got {pixels.shape}")
        pixels.flags.writeable = False
        object.__setattr__(self, "pixels", pixels)

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def channels(self):
        return 1 if self.pixels.ndim == 2 else 3

    @property
    def is_grayscale(self):
        return self.channels == 1


def round_half_up(values):
    return np.floor(np.asarray(values, dtype=ACCUMULATOR) + 0.5)


def parse_netpbm(data):
    """
    Decode a binary P5/P6 payload.

    Args:
        data (bytes): Whole file contents

    Returns:
        Image: Decoded image

    Raises:
        ImageFormatError: On an unsupported magic or maxval, a malformed
            header or a truncated payload
    """
    tokens = []
    position = 0
    for _ in range(4):
        match = _HEADER_TOKEN.match(data, position)
        if match is None:
            raise ImageFormatError("truncated netpbm header")
        tokens.append(match.group(1))
        position = match.end()
    magic, *numbers = tokens
    if magic not in MAGIC_CHANNELS:
        raise ImageFormatError(f"unsupported netpbm magic {magic.decode(errors='replace')!r}; expected P5 or P6")
    try:
        width, height, maxval = (int(number) for number in numbers)
    except ValueError:
        raise ImageFormatError("netpbm header fields must be integers") from None
    if maxval != MAXVAL:
        raise ImageFormatError(f"unsupported maxval {maxval}; only {MAXVAL} is supported")
    if width < 1 or height < 1:
        raise ImageFormatError(f"netpbm size must be positive, got {width}x{height}")
    if position >= len(data) or not data[position:position + 1].isspace():
        raise ImageFormatError("missing whitespace after netpbm header")
    position += 1

    channels = MAGIC_CHANNELS[magic]
    expected = width * height * channels
    payload = data[position:position + expected]
    if len(payload) < expected:
        raise ImageFormatError(f"truncated payload: {len(payload)} of {expected} bytes")
    shape = (height, width) if channels == 1 else (height, width, 3)
    return Image(np.frombuffer(payload, dtype=np.uint8).reshape(shape))


def encode_netpbm(img):
    header = b"%s\n%d %d\n%d\n" % (CHANNEL_MAGIC[img.channels], img.width, img.height, MAXVAL)
    return header + img.pixels.tobytes()


def encode_png(img):
    buffer = io.BytesIO()
    PIL.Image.fromarray(np.asarray(img.pixels)).save(buffer, format="PNG")
    return buffer.getvalue()


def load_image(path):
    """Read a P5/P6 netpbm file."""
    path = Path(path)
    image = parse_netpbm(path.read_bytes())
    logger.debug("loaded %s: %dx%d, %d channel(s)", path, image.width, image.height, image.channels)
    return image


def save_image(img, path):
    """
    Write an image; ``.png`` paths are encoded with Pillow, anything else as netpbm.

    A grayscale image is written as P5 and an RGB image as P6 regardless of the
    extension of a netpbm path.
    """
    path = Path(path)
    if path.suffix.lower() == ".png":
        path.write_bytes(encode_png(img))
    else:
        path.write_bytes(encode_netpbm(img))
    logger.debug("wrote %s", path)


def to_input_tensor(img):
    """Scale pixels to [0, 1]; shape (1, H, W) for grayscale and (3, H, W) for RGB."""
    values = np.asarray(img.pixels, dtype=ACCUMULATOR) / MAXVAL
    if img.is_grayscale:
        return as_tensor(values[np.newaxis])
    return as_tensor(values.transpose(2, 0, 1))


def to_grayscale(img):
    """Luma (ITU-R 601) of an RGB image; grayscale images are returned unchanged."""
    if img.is_grayscale:
        return img
    luma = np.asarray(img.pixels, dtype=ACCUMULATOR) @ np.array([0.299, 0.587, 0.114])
    return Image(round_half_up(luma).clip(0, MAXVAL))


def mask_to_image(mask):
    """
    Render a [0, 1] mask as a grayscale image with values round(255 * mask).

    Args:
        mask (SaliencyMask | numpy.ndarray): Mask or raw (H, W) values
    """
    values = np.asarray(getattr(mask, "values", mask), dtype=ACCUMULATOR)
    if values.ndim != 2:
        raise ShapeError(f"mask must be (H, W), got {values.shape}")
    return Image(round_half_up(np.clip(values, 0.0, 1.0) * MAXVAL))


def overlay_red(gray, mask):
    """
    Overlay a mask in red on a grayscale image.

    Each pixel becomes R = max(g, round(255 * m)) and G = B = round(g * (1 - m)),
    so red never drops below the gray value and the background dims where the
    mask is high.

    Args:
        gray (Image): Grayscale image
        mask (SaliencyMask | numpy.ndarray): (H, W) mask in [0, 1]

    Returns:
        Image: RGB image

    Raises:
        ShapeError: If the image is not grayscale or the shapes differ
    """
    if not gray.is_grayscale:
        raise ShapeError("overlay_red expects a grayscale image")
    values = np.asarray(getattr(mask, "values", mask), dtype=ACCUMULATOR)
    if values.shape != gray.pixels.shape:
        raise ShapeError(f"mask shape {values.shape} does not match image shape {gray.pixels.shape}")
    g = np.asarray(gray.pixels, dtype=ACCUMULATOR)
    red = np.maximum(g, round_half_up(MAXVAL * values))
    dimmed = round_half_up(g * (1.0 - values))
    return Image(np.stack([red, dimmed, dimmed], axis=-1).clip(0, MAXVAL))

import io
import tempfile
from pathlib import Path

import numpy as np
import PIL.Image
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from ..exceptions import ImageFormatError, ShapeError
from ..imaging import (
    Image,
    encode_netpbm,
    load_image,
    mask_to_image,
    overlay_red,
    parse_netpbm,
    round_half_up,
    save_image,
    to_grayscale,
    to_input_tensor,
)
from .utils import netpbm_bytes, write_netpbm


class NetpbmTests(SimpleTestCase):
    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.tmp = Path(tmp.name)

    def test_parse_grayscale(self):
        image = parse_netpbm(b"P5\n2 2\n255\n" + bytes([0, 85, 170, 255]))
        self.assertTrue(image.is_grayscale)
        assert_array_equal(image.pixels, [[0, 85], [170, 255]])

    def test_parse_rgb_with_comments(self):
        image = parse_netpbm(b"P6 # rgb\n# size\n1 2\n255\n" + bytes(range(6)))
        self.assertEqual((image.channels, image.height, image.width), (3, 2, 1))
        assert_array_equal(image.pixels[1, 0], [3, 4, 5])

    def test_sixteen_bit_maxval(self):
        with self.assertRaisesMessage(ImageFormatError, "maxval 65535"):
            parse_netpbm(b"P6\n1 1\n65535\n" + bytes(6))

    def test_unsupported_magic(self):
        with self.assertRaises(ImageFormatError):
            parse_netpbm(b"P2\n1 1\n255\n0\n")

    def test_truncated_payload(self):
        with self.assertRaisesMessage(ImageFormatError, "3 of 4 bytes"):
            parse_netpbm(b"P5\n2 2\n255\n" + bytes(3))

    def test_truncated_header(self):
        with self.assertRaises(ImageFormatError):
            parse_netpbm(b"P5\n2 2")

    def test_writer_header(self):
        self.assertEqual(encode_netpbm(Image([[7, 8]])), b"P5\n2 1\n255\n\x07\x08")

    def test_file_round_trips(self):
        rng = np.random.default_rng(0)
        for index in range(100):
            height, width = rng.integers(1, 12, size=2)
            shape = (height, width) if index % 2 else (height, width, 3)
            source = write_netpbm(self.tmp / "in.pnm", rng.integers(0, 256, size=shape))
            target = self.tmp / "out.pnm"
            save_image(load_image(source), target)
            self.assertEqual(source.read_bytes(), target.read_bytes())

    def test_png_output(self):
        path = self.tmp / "mask.png"
        save_image(Image([[0, 128], [255, 64]]), path)
        with PIL.Image.open(path) as decoded:
            self.assertEqual(decoded.mode, "L")
            assert_array_equal(np.asarray(decoded), [[0, 128], [255, 64]])

    def test_image_rejects_bad_shapes(self):
        with self.assertRaises(ShapeError):
            Image(np.zeros((2, 2, 2)))


class ConversionTests(SimpleTestCase):
    def test_round_half_up(self):
        assert_array_equal(round_half_up([0.5, 1.5, 2.4999, 127.5]), [1, 2, 2, 128])

    def test_input_tensor_scaling(self):
        gray = to_input_tensor(parse_netpbm(netpbm_bytes([[0, 255]])))
        self.assertEqual(gray.shape, (1, 1, 2))
        assert_allclose(gray, [[[0.0, 1.0]]])
        rgb = to_input_tensor(Image(np.full((2, 3, 3), 51)))
        self.assertEqual(rgb.shape, (3, 2, 3))
        assert_allclose(rgb, np.full((3, 2, 3), 0.2), rtol=1e-6)

    def test_grayscale_of_rgb(self):
        gray = to_grayscale(Image([[[255, 255, 255], [255, 0, 0]]]))
        assert_array_equal(gray.pixels, [[255, 76]])

    def test_mask_to_image(self):
        assert_array_equal(mask_to_image(np.array([[0.0, 0.5, 1.0]])).pixels, [[0, 128, 255]])


class OverlayTests(SimpleTestCase):
    def test_zero_mask_replicates_gray(self):
        gray = Image(np.random.default_rng(1).integers(0, 256, size=(4, 5)))
        out = overlay_red(gray, np.zeros((4, 5)))
        for channel in range(3):
            assert_array_equal(out.pixels[..., channel], gray.pixels)

    def test_full_mask_turns_pixel_red(self):
        out = overlay_red(Image([[100]]), np.ones((1, 1)))
        assert_array_equal(out.pixels[0, 0], [255, 0, 0])

    def test_half_mask_on_white(self):
        out = overlay_red(Image(np.full((2, 2), 255)), np.full((2, 2), 0.5))
        assert_array_equal(out.pixels, np.tile([255, 128, 128], (2, 2, 1)))

    def test_red_never_below_gray(self):
        rng = np.random.default_rng(2)
        gray = Image(rng.integers(0, 256, size=(8, 8)))
        out = overlay_red(gray, rng.uniform(size=(8, 8)))
        self.assertTrue(np.all(out.pixels[..., 0] >= gray.pixels))

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeError):
            overlay_red(Image(np.zeros((2, 2))), np.zeros((2, 3)))

    def test_requires_grayscale(self):
        with self.assertRaises(ShapeError):
            overlay_red(Image(np.zeros((2, 2, 3))), np.zeros((2, 2)))

    def test_png_encoding_of_overlay(self):
        out = overlay_red(Image([[10, 20]]), np.array([[0.0, 1.0]]))
        path = io.BytesIO()
        PIL.Image.fromarray(out.pixels).save(path, format="PNG")
        with PIL.Image.open(io.BytesIO(path.getvalue())) as decoded:
            self.assertEqual(decoded.mode, "RGB")

import logging

import numpy as np
from django.test import SimpleTestCase

from ..exceptions import ShapeError
from ..lrp import lrp_relevance
from ..presets import preset
from ..similarity import compare_masks, jaccard_top, pearson, spearman, top_pixels
from ..visualbackprop import visualbackprop

logger = logging.getLogger(__name__)


class SimilarityTests(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(3)

    def test_identical_masks(self):
        mask = self.rng.uniform(size=(10, 10))
        result = compare_masks(mask, mask)
        self.assertAlmostEqual(result.pearson, 1.0)
        self.assertAlmostEqual(result.spearman, 1.0)
        self.assertEqual(result.jaccard_top5, 1.0)
        self.assertEqual(result.pixels, 100)

    def test_reversed_masks(self):
        mask = np.arange(20, dtype=float).reshape(4, 5)
        self.assertAlmostEqual(pearson(mask, -mask), -1.0)
        self.assertAlmostEqual(spearman(mask, mask.max() - mask), -1.0)

    def test_monotone_transform_keeps_rank_correlation(self):
        mask = self.rng.uniform(size=(6, 6))
        self.assertAlmostEqual(spearman(mask, mask ** 3), 1.0)
        self.assertLess(pearson(mask, mask ** 3), 1.0)

    def test_constant_mask(self):
        result = compare_masks(np.zeros((3, 3)), self.rng.uniform(size=(3, 3)))
        self.assertIsNone(result.pearson)
        self.assertIsNone(result.spearman)

    def test_top_pixel_count(self):
        self.assertEqual(len(top_pixels(np.arange(100))), 5)
        self.assertEqual(len(top_pixels(np.arange(101))), 6)
        self.assertEqual(len(top_pixels(np.arange(3))), 1)
        self.assertEqual(top_pixels(np.arange(100)), set(range(95, 100)))

    def test_top_pixel_ties_break_by_index(self):
        self.assertEqual(top_pixels(np.ones(40)), {0, 1})

    def test_disjoint_top_sets(self):
        a = np.arange(100, dtype=float)
        self.assertEqual(jaccard_top(a, a[::-1]), 0.0)

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeError):
            compare_masks(np.zeros((2, 2)), np.zeros((2, 3)))

    def test_as_dict(self):
        payload = compare_masks(np.eye(4), np.eye(4)).as_dict()
        self.assertEqual(set(payload), {"pearson", "spearman", "jaccard_top5", "top_fraction", "pixels"})


class MethodAgreementTests(SimpleTestCase):
    def test_visualbackprop_and_lrp_on_structured_inputs(self):
        rows, cols = np.mgrid[0:6, 0:6]
        x = ((rows + cols) / 10.0)[np.newaxis]
        finite = []
        by_seed = {}
        for seed in range(10):
            model = preset("tiny", seed=seed)
            result = compare_masks(visualbackprop(model, x), lrp_relevance(model, x).mask)
            by_seed[seed] = result.spearman
            if result.spearman is not None:
                self.assertTrue(-1.0 <= result.spearman <= 1.0)
                finite.append(result.spearman)
            self.assertTrue(0.0 <= result.jaccard_top5 <= 1.0)
        logger.info("tiny vbp vs lrp spearman by seed: %s", by_seed)
        self.assertTrue(finite, by_seed)

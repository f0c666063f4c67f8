import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from ..exceptions import SaliencyError
from ..inference import forward
from ..layers import Flatten, Model
from ..lrp import LrpConfig, lrp_relevance, relevance_from_forward
from ..presets import preset
from .utils import fc, random_conv_net


def single_fc_model():
    return Model(layers=[Flatten(), fc([[1.0, 1.0]])], input_shape=(1, 1, 2))


class LrpConfigTests(SimpleTestCase):
    def test_negative_epsilon(self):
        with self.assertRaises(SaliencyError):
            LrpConfig(epsilon=-1.0)

    def test_default_output_index(self):
        config = LrpConfig()
        self.assertEqual(config.epsilon, 100.0)
        self.assertEqual(config.resolve_output_index(np.array([0.4])), 0)
        self.assertEqual(config.resolve_output_index(np.array([0.1, 0.7, 0.2])), 1)

    def test_output_index_out_of_range(self):
        with self.assertRaises(SaliencyError):
            LrpConfig(output_index=3).resolve_output_index(np.zeros(3))


class LrpRelevanceTests(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(21)

    def test_single_fc_without_stabilizer(self):
        result = lrp_relevance(single_fc_model(), [[[1.0, 2.0]]], LrpConfig(epsilon=0.0))
        assert_allclose(result.relevance, [[[1.0, 2.0]]], rtol=1e-6)
        self.assertEqual(result.raw.shape, (1, 2))

    def test_single_fc_with_default_stabilizer(self):
        result = lrp_relevance(single_fc_model(), [[[1.0, 2.0]]])
        assert_allclose(result.raw, [[3 / 103, 6 / 103]], rtol=1e-6)

    def test_zero_input_gives_zero_relevance(self):
        model = random_conv_net(self.rng, bias=0.0)
        result = lrp_relevance(model, np.zeros(model.input_shape))
        assert_array_equal(result.raw, np.zeros((6, 6)))
        assert_array_equal(result.mask.values, np.zeros((6, 6)))

    def test_conservation_on_positive_nets(self):
        config = LrpConfig(epsilon=0.0)
        for _ in range(50):
            model = random_conv_net(self.rng, low=0.0, high=1.0, bias=0.0)
            x = self.rng.uniform(0.1, 1.0, size=model.input_shape)
            output = forward(model, x).output[0]
            total = lrp_relevance(model, x, config).raw.sum(dtype=np.float64)
            self.assertAlmostEqual(total / output, 1.0, delta=1e-4)

    def test_stabilizer_absorbs_relevance(self):
        for _ in range(20):
            model = random_conv_net(self.rng, low=0.0, high=1.0, bias=0.0)
            x = self.rng.uniform(size=model.input_shape)
            output = float(forward(model, x).output[0])
            total = float(lrp_relevance(model, x).raw.sum(dtype=np.float64))
            self.assertLessEqual(abs(total), abs(output) + 1e-6)

    def test_repeated_runs_are_identical(self):
        model = preset("tiny", seed=5)
        x = self.rng.uniform(size=model.input_shape)
        first, second = lrp_relevance(model, x), lrp_relevance(model, x)
        self.assertEqual(first.relevance.tobytes(), second.relevance.tobytes())

    def test_default_index_is_argmax_for_multiple_outputs(self):
        model = random_conv_net(self.rng, head=4)
        x = self.rng.uniform(size=model.input_shape)
        result = lrp_relevance(model, x)
        self.assertEqual(result.output_index, int(np.argmax(forward(model, x).output)))

    def test_explicit_index_out_of_range(self):
        model = random_conv_net(self.rng, head=2)
        with self.assertRaises(SaliencyError):
            lrp_relevance(model, np.ones(model.input_shape), LrpConfig(output_index=2))

    def test_batchnorm_presets(self):
        model = preset("gtsdb", seed=1)
        result = lrp_relevance(model, self.rng.uniform(size=model.input_shape))
        self.assertEqual(result.relevance.shape, model.input_shape)
        self.assertEqual(result.mask.shape, model.input_shape[1:])
        self.assertTrue(np.all(np.isfinite(result.relevance)))

    def test_needs_recorded_layer_inputs(self):
        model = single_fc_model()
        with self.assertRaises(SaliencyError):
            relevance_from_forward(model, forward(model, [[[1.0, 2.0]]]), LrpConfig())

import numpy as np
from django.test import SimpleTestCase

from ..exceptions import (
    DegenerateFlowError,
    GeometryError,
    PathCapExceededError,
    SaliencyError,
    UnsupportedLayerError,
)
from ..flow_oracle import (
    build_flow_graph,
    check_trial,
    degenerate_nodes,
    degree_violations,
    phi,
    phi_all,
    phi_by_enumeration,
    random_oracle_model,
    replay_activations,
    run_oracle_trials,
    to_bias_free,
    vbp_proportionality_report,
    with_dead_node,
)
from ..inference import forward
from ..presets import preset
from .utils import conv, conv_relu_model


def relative_gap(left, right):
    scale = max(max(abs(value) for value in left.values()), 1e-12)
    return max(abs(left[key] - right[key]) for key in left) / scale


def tiny_trunk():
    return preset("tiny").without_batchnorm().conv_trunk()


class BuildFlowGraphTests(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(31)

    def test_single_conv_degree(self):
        model = conv_relu_model((1, 3, 3), conv(np.ones((1, 1, 2, 2))))
        graph = build_flow_graph(model, np.ones((1, 3, 3)))
        self.assertEqual(len(graph.part(0)), 9)
        self.assertEqual(len(graph.part(1)), 4)
        self.assertFalse(graph.is_borderline((0, 0, 1, 1)))
        self.assertEqual(graph.out_degree((0, 0, 1, 1)), 4)
        self.assertTrue(graph.is_borderline((0, 0, 0, 0)))
        self.assertEqual(graph.out_degree((0, 0, 0, 0)), 1)
        self.assertEqual(degree_violations(graph), [])

    def test_degree_property_on_random_graphs(self):
        for _ in range(20):
            model, x = random_oracle_model(self.rng)
            self.assertEqual(degree_violations(build_flow_graph(model, x)), [])

    def test_negative_preactivations_kill_every_path(self):
        model = conv_relu_model((1, 3, 3), conv(-np.ones((2, 1, 2, 2))))
        graph = build_flow_graph(model, np.ones((1, 3, 3)))
        self.assertTrue(all(graph.node(key).dead for key in graph.part(1)))
        self.assertEqual(graph.live_subgraph().number_of_edges(), 0)
        self.assertTrue(all(value == 0 for value in phi_all(graph, "vbp").values()))
        report = vbp_proportionality_report(model, np.ones((1, 3, 3)), graph=graph)
        self.assertEqual(report.matched_variant, "inconclusive")

    def test_activations_match_forward_trace(self):
        model = tiny_trunk()
        x = self.rng.uniform(size=model.input_shape)
        graph = build_flow_graph(model, x)
        for part, stage in enumerate(forward(model, x).trace.stages, start=1):
            for c, row, col in np.ndindex(*stage.post_relu.shape):
                self.assertAlmostEqual(graph.node((part, c, row, col)).activation,
                                       float(stage.post_relu[c, row, col]), delta=1e-6)

    def test_rejects_batchnorm(self):
        model = preset("tiny")
        with self.assertRaises(UnsupportedLayerError):
            build_flow_graph(model, np.ones(model.input_shape))

    def test_rejects_strided_conv(self):
        model = conv_relu_model((1, 4, 4), conv(np.ones((1, 1, 2, 2)), stride=(2, 2)))
        with self.assertRaises(GeometryError):
            build_flow_graph(model, np.ones((1, 4, 4)))

    def test_path_cap(self):
        model = tiny_trunk()
        with self.assertRaises(PathCapExceededError):
            build_flow_graph(model, np.ones(model.input_shape), path_cap=10)


class BiasFreeTests(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(37)

    def test_single_incoming_edge_passes_through(self):
        model = conv_relu_model((1, 2, 2), conv([[[[2.0]]]]))
        transformed = to_bias_free(build_flow_graph(model, [[[0.25, 0.5], [0.75, 1.0]]]))
        for key in transformed.part(0):
            (edge,) = transformed.edges_from(key)
            self.assertEqual(edge.amplification, 1.0)
        self.assertTrue(transformed.bias_free)

    def test_replay_without_biases(self):
        model = conv_relu_model((1, 5, 5), conv(self.rng.uniform(-1, 1, size=(2, 1, 2, 2))),
                                conv(self.rng.uniform(-1, 1, size=(2, 2, 2, 2))))
        graph = build_flow_graph(model, self.rng.uniform(size=(1, 5, 5)))
        replayed = replay_activations(to_bias_free(graph))
        for key, value in replayed.items():
            self.assertAlmostEqual(value, graph.node(key).activation, delta=1e-9)

    def test_replay_on_random_instances(self):
        replayed_graphs = 0
        for _ in range(100):
            model, x = random_oracle_model(self.rng)
            graph = build_flow_graph(model, x)
            try:
                transformed = to_bias_free(graph)
            except DegenerateFlowError:
                self.assertTrue(degenerate_nodes(graph))
                continue
            replayed_graphs += 1
            replayed = replay_activations(transformed)
            worst = max(abs(value - graph.node(key).activation) for key, value in replayed.items())
            self.assertLessEqual(worst, 1e-6)
        self.assertGreater(replayed_graphs, 50)

    def test_live_node_without_input_flow(self):
        model = conv_relu_model((1, 2, 2), conv([[[[0.0]]]], bias=[0.5]))
        graph = build_flow_graph(model, np.ones((1, 2, 2)))
        self.assertEqual(len(degenerate_nodes(graph)), 4)
        with self.assertRaises(DegenerateFlowError):
            to_bias_free(graph)
        outcome = check_trial(model, np.ones((1, 2, 2)))
        self.assertEqual(outcome["status"], "passed")
        self.assertEqual(outcome["report"].degenerate_nodes, 4)

    def test_node_kept_alive_by_bias_behind_dead_stage(self):
        model = conv_relu_model((1, 2, 2), conv([[[[1.0]]]], bias=[-10.0]), conv([[[[1.0]]]], bias=[0.5]))
        x = np.full((1, 2, 2), 0.5)
        graph = build_flow_graph(model, x)
        second = graph.part(2)
        self.assertEqual(sorted(degenerate_nodes(graph)), sorted(second))
        for key in second:
            self.assertEqual(graph.node(key).gamma, 0.0)
            self.assertAlmostEqual(graph.node(key).activation, 0.5)
        with self.assertRaises(DegenerateFlowError):
            to_bias_free(graph)
        outcome = check_trial(model, x)
        self.assertEqual(outcome["reasons"], [])
        self.assertNotEqual(outcome["status"], "failed")
        self.assertEqual(outcome["report"].degenerate_nodes, 4)


class PhiTests(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(41)
        self.single = conv_relu_model((1, 3, 3), conv(self.rng.uniform(0.1, 1.0, size=(1, 1, 2, 2))))
        self.x = self.rng.uniform(0.1, 1.0, size=(1, 3, 3))

    def test_interior_pixel_sums_covering_activations(self):
        graph = build_flow_graph(self.single, self.x)
        expected = sum(graph.node(key).activation for key in graph.part(1))
        self.assertAlmostEqual(phi(graph, (0, 0, 1, 1), "vbp"), expected, places=12)
        gamma = graph.node((0, 0, 1, 1)).gamma
        self.assertAlmostEqual(phi(graph, (0, 0, 1, 1), "vbp", include_source=True), gamma * expected, places=12)

    def test_general_equals_no_bias_without_biases(self):
        model = conv_relu_model((1, 5, 5), conv(self.rng.uniform(0.1, 1.0, size=(2, 1, 2, 2))),
                                conv(self.rng.uniform(0.1, 1.0, size=(1, 2, 2, 2))))
        graph = build_flow_graph(model, self.rng.uniform(size=(1, 5, 5)))
        self.assertLessEqual(relative_gap(phi_all(graph, "general"), phi_all(graph, "no_bias")), 1e-6)

    def test_general_matches_no_bias_on_bias_free_graph(self):
        model = tiny_trunk()
        graph = build_flow_graph(model, self.rng.uniform(size=model.input_shape))
        general = phi_all(graph, "general")
        transformed = phi_all(to_bias_free(graph), "no_bias")
        self.assertLessEqual(relative_gap(general, transformed), 1e-6)

    def test_dynamic_programming_matches_enumeration(self):
        model = conv_relu_model((1, 4, 4), conv(self.rng.uniform(-1, 1, size=(2, 1, 2, 2)), [0.1, -0.1]),
                                conv(self.rng.uniform(-1, 1, size=(2, 2, 2, 2)), [0.05, 0.0]))
        graph = build_flow_graph(model, self.rng.uniform(0.05, 1.0, size=(1, 4, 4)))
        for variant in ("no_bias", "general", "vbp"):
            for key in graph.part(0):
                self.assertAlmostEqual(phi(graph, key, variant), phi_by_enumeration(graph, key, variant), places=9)

    def test_dead_node_removes_its_paths(self):
        graph = build_flow_graph(self.single, self.x)
        killed_key = (1, 0, 0, 0)
        lost = graph.node(killed_key).activation
        before = phi_all(graph, "vbp")
        after = phi_all(with_dead_node(graph, killed_key), "vbp")
        for key in graph.part(0):
            _, _, row, col = key
            covered = row <= 1 and col <= 1
            self.assertAlmostEqual(after[key], before[key] - (lost if covered else 0.0), places=12)

    def test_requires_input_node(self):
        graph = build_flow_graph(self.single, self.x)
        with self.assertRaises(SaliencyError):
            phi(graph, (1, 0, 0, 0), "vbp")
        with self.assertRaises(SaliencyError):
            phi(graph, (0, 0, 0, 0), "gradient")


class ProportionalityTests(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(43)

    def test_tiny_trunk_matches_without_source(self):
        model = tiny_trunk()
        report = vbp_proportionality_report(model, self.rng.uniform(0.05, 1.0, size=model.input_shape))
        self.assertEqual(report.matched_variant, "without_source")
        self.assertLessEqual(report.ratio_spread, 1e-5)
        # one over the product of the channel counts averaged at each stage
        self.assertAlmostEqual(report.ratio_mean, 1 / 6, delta=1e-6)
        self.assertGreater(report.pixels_evaluated, 0)

    def test_single_map_ratio_is_one(self):
        model = conv_relu_model((1, 3, 3), conv(self.rng.uniform(0.1, 1.0, size=(1, 1, 2, 2))))
        report = vbp_proportionality_report(model, self.rng.uniform(0.1, 1.0, size=(1, 3, 3)))
        self.assertEqual(report.matched_variant, "without_source")
        self.assertAlmostEqual(report.ratio_mean, 1.0, delta=1e-6)

    def test_zero_input_is_inconclusive(self):
        model = conv_relu_model((1, 4, 4), conv(np.ones((1, 1, 2, 2))))
        report = vbp_proportionality_report(model, np.zeros((1, 4, 4)))
        self.assertFalse(report.conclusive)
        self.assertIsNone(report.as_dict()["ratio_mean"])

    def test_report_json_shape(self):
        model = tiny_trunk()
        payload = vbp_proportionality_report(model, np.ones(model.input_shape)).as_dict()
        self.assertEqual(set(payload["variants"]), {"with_source", "without_source"})
        for key in ("matched_variant", "ratio_mean", "ratio_spread", "pixels_evaluated"):
            self.assertIn(key, payload)


class OracleTrialTests(SimpleTestCase):
    def test_random_trials_pass(self):
        summary = run_oracle_trials(seed=1, trials=50)
        self.assertEqual(summary["failed"], 0, summary["failures"])
        self.assertEqual(summary["passed"] + summary["inconclusive"], 50)
        self.assertNotIn("with_source", summary["matched_variants"])

    def test_trials_are_reproducible(self):
        self.assertEqual(run_oracle_trials(seed=7, trials=5), run_oracle_trials(seed=7, trials=5))

    def test_random_models_fit_requested_size(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            model, x = random_oracle_model(rng, max_size=(4, 5))
            self.assertLessEqual(model.input_shape[1], 4)
            self.assertLessEqual(model.input_shape[2], 5)
            self.assertEqual(x.shape, model.input_shape)

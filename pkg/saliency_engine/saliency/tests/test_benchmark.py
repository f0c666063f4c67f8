import numpy as np
from django.test import SimpleTestCase

from ..benchmark import BenchReport, compare_methods, effective_thread_count, run_bench
from ..exceptions import SaliencyError
from ..presets import preset


class BenchReportTests(SimpleTestCase):
    def test_single_sample(self):
        report = BenchReport.from_samples([2.5], method="vbp", model_name="m", input_shape=[1, 2, 2], warmup_runs=0)
        self.assertEqual((report.mean_ms, report.p50_ms, report.min_ms), (2.5, 2.5, 2.5))
        self.assertEqual(report.timed_runs, 1)

    def test_summary_statistics(self):
        report = BenchReport.from_samples([3.0, 1.0, 2.0, 10.0], method="lrp", model_name="m",
                                          input_shape=[1, 2, 2], warmup_runs=1)
        self.assertEqual(report.mean_ms, 4.0)
        self.assertEqual(report.p50_ms, 2.5)
        self.assertEqual(report.min_ms, 1.0)
        self.assertEqual(report.to_dict()["per_run_ms"], [3.0, 1.0, 2.0, 10.0])


class RunBenchTests(SimpleTestCase):
    def setUp(self):
        self.model = preset("tiny")
        self.x = np.random.default_rng(0).uniform(size=self.model.input_shape)

    def test_one_run(self):
        report = run_bench(self.model, self.x, "vbp", runs=1, model_name="tiny")
        self.assertEqual(len(report.per_run_ms), 1)
        self.assertEqual(report.p50_ms, report.per_run_ms[0])
        self.assertTrue(report.deterministic)
        self.assertEqual(report.input_shape, [1, 6, 6])
        self.assertIn("forward excluded", report.timed_region)

    def test_warmup_is_not_timed(self):
        report = run_bench(self.model, self.x, "lrp", runs=3, warmup=2, threads=1)
        self.assertEqual(report.timed_runs, 3)
        self.assertEqual(report.warmup_runs, 2)
        self.assertEqual(report.thread_count, 1)
        self.assertTrue(report.deterministic)

    def test_invalid_arguments(self):
        with self.assertRaises(SaliencyError):
            run_bench(self.model, self.x, "vbp", runs=0)
        with self.assertRaises(SaliencyError):
            run_bench(self.model, self.x, "vbp", runs=1, warmup=-1)
        with self.assertRaises(SaliencyError):
            run_bench(self.model, self.x, "gradcam", runs=1)

    def test_effective_thread_count(self):
        self.assertEqual(effective_thread_count(3), 3)
        self.assertGreaterEqual(effective_thread_count(None), 1)


class CompareMethodsTests(SimpleTestCase):
    def test_summary_keys(self):
        model = preset("tiny")
        summary, reports = compare_methods(model, np.ones(model.input_shape), runs=2, model_name="tiny")
        self.assertEqual(set(reports), {"vbp", "lrp"})
        self.assertEqual(summary["vbp"]["method"], "vbp")
        self.assertEqual(summary["lrp"]["timed_runs"], 2)
        self.assertGreater(summary["forward_mean_ms"], 0.0)

    def test_visualbackprop_is_faster_on_netsvf(self):
        model = preset("netsvf")
        x = np.random.default_rng(1).uniform(size=model.input_shape)
        summary, reports = compare_methods(model, x, runs=5, warmup=1, threads=1)
        self.assertLess(reports["vbp"].mean_ms, reports["lrp"].mean_ms)
        self.assertLess(reports["vbp"].mean_ms, summary["forward_mean_ms"])
        self.assertGreater(summary["lrp_over_vbp"], 1.0)

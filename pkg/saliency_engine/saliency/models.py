"""
Models for the saliency engine.

This module contains the database records that make saved networks and
benchmark history visible in the admin and the web surface. The networks
themselves live on disk as a JSON manifest plus a weight blob; the database
only stores where they are and how they were produced.

Classes:
    ModelArtifact: A saved model manifest registered under a unique name
    BenchRecord: One timing report for one saliency method
"""

from django.db import models

from .model_io import load_model


class ModelArtifact(models.Model):
    """
    Model representing a network saved on disk.

    Attributes:
        name (CharField): Unique name of the artifact
        manifest_path (CharField): Absolute path of the JSON manifest
        preset (CharField): Preset the weights were generated from, blank if imported
        seed (BigIntegerField): Preset seed (nullable)
        input_shape (CharField): Expected input as "CxHxW"
        created_at (DateTimeField): Timestamp when the artifact was registered

    Methods:
        load(): Read and validate the manifest and weights
        conv_stage_count(): Number of convolutional stages in the saved network
        shape_label(shape): Static method formatting a shape tuple
    """
    name = models.CharField(max_length=100, unique=True, verbose_name="Artifact Name")
    manifest_path = models.CharField(max_length=500, verbose_name="Manifest Path")
    preset = models.CharField(max_length=20, blank=True)
    seed = models.BigIntegerField(null=True, blank=True)
    input_shape = models.CharField(max_length=50)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        verbose_name = "Model Artifact"
        verbose_name_plural = "Model Artifacts"
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.name} ({self.input_shape})"

    def load(self):
        """
        Load the saved network.

        Returns:
            Model: Validated model

        Raises:
            ManifestError: If the manifest or weights are missing or inconsistent
        """
        return load_model(self.manifest_path)

    def conv_stage_count(self):
        return len(self.load().conv_layers())

    @staticmethod
    def shape_label(shape):
        return "x".join(str(extent) for extent in shape)


class BenchRecord(models.Model):
    """
    Model representing one benchmark report.

    Attributes:
        artifact (ForeignKey): Benchmarked artifact (nullable for unregistered models)
        model_name (CharField): Label of the benchmarked model
        method (CharField): Saliency method, vbp or lrp
        warmup_runs (PositiveIntegerField): Untimed repetitions
        timed_runs (PositiveIntegerField): Timed repetitions
        mean_ms, p50_ms, min_ms (FloatField): Summary statistics in milliseconds
        thread_count (PositiveIntegerField): BLAS threads in effect
        timed_region (CharField): What the timer measured
        per_run_ms (JSONField): Every timed sample
        created_at (DateTimeField): When the report was stored
    """
    METHOD_CHOICES = [
        ('vbp', 'VisualBackProp'),
        ('lrp', 'LRP (epsilon rule)'),
    ]

    artifact = models.ForeignKey(ModelArtifact, on_delete=models.SET_NULL, null=True, blank=True,
                                 related_name="bench_records")
    model_name = models.CharField(max_length=100)
    method = models.CharField(max_length=3, choices=METHOD_CHOICES)
    warmup_runs = models.PositiveIntegerField(default=0)
    timed_runs = models.PositiveIntegerField()
    mean_ms = models.FloatField()
    p50_ms = models.FloatField()
    min_ms = models.FloatField()
    thread_count = models.PositiveIntegerField(default=1)
    timed_region = models.CharField(max_length=200, blank=True)
    per_run_ms = models.JSONField(default=list)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        verbose_name = "Bench Record"
        verbose_name_plural = "Bench Records"
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.model_name} - {self.get_method_display()} - {self.mean_ms:.3f} ms"

    @classmethod
    def from_report(cls, report, artifact=None):
        """
        Store a BenchReport.

        Args:
            report (BenchReport): Report produced by ``run_bench``
            artifact (ModelArtifact | None): Artifact the report belongs to

        Returns:
            BenchRecord: The saved record
        """
        return cls.objects.create(
            artifact=artifact,
            model_name=report.model_name,
            method=report.method,
            warmup_runs=report.warmup_runs,
            timed_runs=report.timed_runs,
            mean_ms=report.mean_ms,
            p50_ms=report.p50_ms,
            min_ms=report.min_ms,
            thread_count=report.thread_count,
            timed_region=report.timed_region,
            per_run_ms=list(report.per_run_ms),
        )

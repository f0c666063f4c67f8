"""
Django Admin Configuration for the saliency engine.

Registered Models:
    ModelArtifact: Saved networks and where their manifests live
    BenchRecord: Benchmark history per method and artifact
"""

from django.contrib import admin

from .models import BenchRecord, ModelArtifact


@admin.register(ModelArtifact)
class ModelArtifactAdmin(admin.ModelAdmin):
    """
    Admin interface for ModelArtifact model.

    Lists saved networks with their preset origin and benchmark count.
    """
    list_display = ['name', 'preset', 'seed', 'input_shape', 'created_at', 'bench_count']
    list_filter = ['preset', 'created_at']
    search_fields = ['name', 'manifest_path']
    readonly_fields = ['created_at']

    def bench_count(self, obj):
        """Display the number of stored benchmark reports."""
        return obj.bench_records.count()
    bench_count.short_description = 'Benchmarks'


@admin.register(BenchRecord)
class BenchRecordAdmin(admin.ModelAdmin):
    list_display = ['model_name', 'method', 'mean_ms', 'p50_ms', 'min_ms', 'timed_runs', 'thread_count', 'created_at']
    list_filter = ['method', 'thread_count', 'created_at']
    search_fields = ['model_name', 'artifact__name']
    readonly_fields = ['created_at', 'per_run_ms']

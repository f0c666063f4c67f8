# Generated by Django 5.2 on 2026-10-18 09:12

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ModelArtifact',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(max_length=100, unique=True, verbose_name='Artifact Name')),
                ('manifest_path', models.CharField(max_length=500, verbose_name='Manifest Path')),
                ('preset', models.CharField(blank=True, max_length=20)),
                ('seed', models.BigIntegerField(blank=True, null=True)),
                ('input_shape', models.CharField(max_length=50)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'verbose_name': 'Model Artifact',
                'verbose_name_plural': 'Model Artifacts',
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='BenchRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('model_name', models.CharField(max_length=100)),
                ('method', models.CharField(choices=[('vbp', 'VisualBackProp'), ('lrp', 'LRP (epsilon rule)')], max_length=3)),
                ('warmup_runs', models.PositiveIntegerField(default=0)),
                ('timed_runs', models.PositiveIntegerField()),
                ('mean_ms', models.FloatField()),
                ('p50_ms', models.FloatField()),
                ('min_ms', models.FloatField()),
                ('thread_count', models.PositiveIntegerField(default=1)),
                ('timed_region', models.CharField(blank=True, max_length=200)),
                ('per_run_ms', models.JSONField(default=list)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('artifact', models.ForeignKey(blank=True, null=True, on_delete=django.db.models.deletion.SET_NULL, related_name='bench_records', to='saliency.modelartifact')),
            ],
            options={
                'verbose_name': 'Bench Record',
                'verbose_name_plural': 'Bench Records',
                'ordering': ['-created_at'],
            },
        ),
    ]

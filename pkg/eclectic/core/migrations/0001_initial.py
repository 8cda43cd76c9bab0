# Generated by Django 4.2.11 on 2026-10-19 09:12

from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='RunManifest',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(max_length=20)),
                ('config_hash', models.CharField(db_index=True, max_length=64)),
                ('config', models.JSONField(default=dict)),
                ('seeds', models.JSONField(default=list)),
                ('tool_version', models.CharField(default='0.4.0', max_length=20)),
                ('input_ids', models.JSONField(default=dict)),
                ('outputs', models.JSONField(default=list)),
                ('out_dir', models.CharField(blank=True, max_length=500)),
                ('status', models.CharField(choices=[('running', 'Running'), ('completed', 'Completed'), ('failed', 'Failed')], default='running', max_length=20)),
                ('error', models.TextField(blank=True, null=True)),
                ('started_at', models.DateTimeField(auto_now_add=True)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'ordering': ['-started_at'],
            },
        ),
        migrations.CreateModel(
            name='PathResult',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('job_key', models.CharField(max_length=255)),
                ('label', models.CharField(max_length=255)),
                ('seed', models.PositiveIntegerField()),
                ('csv_path', models.CharField(max_length=500)),
                ('steps', models.PositiveIntegerField(default=0)),
                ('terminal_wealth', models.FloatField(null=True)),
                ('flagged_steps', models.PositiveIntegerField(default=0)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='paths', to='core.runmanifest')),
            ],
            options={
                'ordering': ['job_key'],
            },
        ),
        migrations.AddConstraint(
            model_name='pathresult',
            constraint=models.UniqueConstraint(fields=('run', 'job_key'), name='unique_job_per_run'),
        ),
    ]

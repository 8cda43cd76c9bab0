from django.conf import settings
from django.db import models


class RunStatus(models.TextChoices):
    RUNNING = "running", "Running"
    COMPLETED = "completed", "Completed"
    FAILED = "failed", "Failed"


class RunManifest(models.Model):
    # Identification
    command = models.CharField(max_length=20)
    config_hash = models.CharField(max_length=64, db_index=True)
    config = models.JSONField(default=dict)
    seeds = models.JSONField(default=list)
    tool_version = models.CharField(max_length=20, default=settings.TOOL_VERSION)

    # Inputs / outputs
    input_ids = models.JSONField(default=dict)  # path -> git-style blob id
    outputs = models.JSONField(default=list)
    out_dir = models.CharField(max_length=500, blank=True)

    # Status
    status = models.CharField(
        max_length=20, choices=RunStatus.choices, default=RunStatus.RUNNING
    )
    error = models.TextField(blank=True, null=True)

    started_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ["-started_at"]

    def to_manifest(self) -> dict:
        return {
            "command": self.command,
            "config_hash": self.config_hash,
            "seeds": self.seeds,
            "started": self.started_at.isoformat() if self.started_at else None,
            "finished": self.finished_at.isoformat() if self.finished_at else None,
            "tool_version": self.tool_version,
            "inputs": self.input_ids,
            "outputs": self.outputs,
            "status": self.status,
        }

    def __str__(self):
        return f"{self.command} {self.config_hash[:12]} ({self.status})"


class PathResult(models.Model):
    run = models.ForeignKey(RunManifest, on_delete=models.CASCADE, related_name="paths")
    job_key = models.CharField(max_length=255)
    label = models.CharField(max_length=255)  # arm or bandit configuration
    seed = models.PositiveIntegerField()
    csv_path = models.CharField(max_length=500)
    steps = models.PositiveIntegerField(default=0)
    terminal_wealth = models.FloatField(null=True)
    flagged_steps = models.PositiveIntegerField(default=0)

    class Meta:
        ordering = ["job_key"]
        constraints = [
            models.UniqueConstraint(fields=["run", "job_key"], name="unique_job_per_run")
        ]

    def __str__(self):
        return f"{self.job_key} -> {self.terminal_wealth}"

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.utils import timezone

from core.exceptions import ConfigError, EclecticError
from core.helpers import config_hash, content_id
from core.models import PathResult, RunManifest, RunStatus
from core.serializers import RunManifestSerializer, load_config, prices_path

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


def parse_seeds(value):
    """`3` means seeds 0, 1, 2; `4,7,9` lists them explicitly."""
    if value is None:
        return None
    value = str(value).strip()
    try:
        if "," in value:
            seeds = [int(s) for s in value.split(",") if s.strip()]
        else:
            seeds = list(range(int(value)))
    except ValueError:
        raise CommandError(f"--seeds expects a count or a comma-separated list, got {value!r}", returncode=1)
    if not seeds or min(seeds) < 0:
        raise CommandError(f"--seeds must name at least one non-negative seed, got {value!r}", returncode=1)
    return seeds


@dataclass
class RunContext:
    config: dict
    config_path: Path
    seeds: list
    out_dir: Path
    jobs: int
    options: dict
    outputs: list = field(default_factory=list)
    summaries: list = field(default_factory=list)

    @property
    def prices(self) -> Path:
        return prices_path(self.config, self.config_path)

    def output(self, path) -> Path:
        self.outputs.append(str(path))
        return Path(path)


class EclecticCommand(BaseCommand):
    """Shared flags, config loading, exit codes and run bookkeeping."""

    requires_config = True

    def add_arguments(self, parser):
        parser.add_argument("--config", help="TOML run configuration")
        parser.add_argument("--out-dir", default="out", help="directory receiving every output file")
        parser.add_argument("--seeds", help="seed count N (seeds 0..N-1) or a comma-separated list")
        parser.add_argument("--jobs", type=int, default=1, help="worker processes for local runs")
        parser.add_argument("--log-level", choices=LOG_LEVELS, help="level of the core loggers for this run")
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def input_paths(self, ctx: RunContext) -> list:
        return [ctx.config_path, ctx.prices] if ctx.config else []

    def run(self, ctx: RunContext):
        raise NotImplementedError

    # ------------------------------------------------------------------

    def handle(self, *args, **options):
        if options.get("log_level"):
            logging.getLogger("core").setLevel(options["log_level"])
        if options["jobs"] < 1:
            raise CommandError("--jobs must be at least 1", returncode=1)

        config = None
        config_path = Path(options["config"]) if options.get("config") else None
        if config_path is not None:
            try:
                config = load_config(config_path)
            except ConfigError as exc:
                raise CommandError(f"invalid configuration:\n{exc}", returncode=1)
        elif self.requires_config:
            raise CommandError("--config is required", returncode=1)

        seeds = parse_seeds(options.get("seeds"))
        if seeds is None:
            seeds = list(config["backtest"]["seeds"]) if config else [0]
        out_dir = Path(options["out_dir"])
        out_dir.mkdir(parents=True, exist_ok=True)
        ctx = RunContext(config, config_path, seeds, out_dir, options["jobs"], options)

        run = self._start_run(ctx)
        try:
            self.run(ctx)
        except CommandError as exc:
            self._finish_run(run, ctx, RunStatus.FAILED, str(exc))
            raise
        except EclecticError as exc:
            self._finish_run(run, ctx, RunStatus.FAILED, str(exc))
            raise CommandError(str(exc), returncode=2) from exc
        except (OSError, ValueError) as exc:
            self._finish_run(run, ctx, RunStatus.FAILED, str(exc))
            raise CommandError(f"{type(exc).__name__}: {exc}", returncode=2) from exc
        self._finish_run(run, ctx, RunStatus.COMPLETED)

    def _start_run(self, ctx: RunContext) -> RunManifest:
        inputs = {}
        for path in self.input_paths(ctx):
            if Path(path).is_file():
                inputs[str(path)] = content_id(path)
        run = RunManifest(
            command=self.command_name,
            config_hash=config_hash(ctx.config or {}),
            config=ctx.config or {},
            seeds=ctx.seeds,
            input_ids=inputs,
            out_dir=str(ctx.out_dir),
            started_at=timezone.now(),
        )
        if settings.RECORD_RUNS:
            run.save()
        return run

    def _finish_run(self, run: RunManifest, ctx: RunContext, status, error=None):
        run.status = status
        run.error = error
        run.outputs = sorted(ctx.outputs)
        run.finished_at = timezone.now()
        if settings.RECORD_RUNS:
            run.save()
            for summary in ctx.summaries:
                fields = {k: v for k, v in summary.items() if k != "job_key"}
                PathResult.objects.update_or_create(run=run, job_key=summary["job_key"], defaults=fields)
            manifest = RunManifestSerializer(run).data
        else:
            manifest = run.to_manifest()
        path = ctx.out_dir / f"manifest-{self.command_name}.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
        if status == RunStatus.COMPLETED:
            self.stdout.write(self.style.SUCCESS(f"{self.command_name}: {len(run.outputs)} output(s), manifest {path}"))

    @property
    def command_name(self) -> str:
        return self.__module__.rsplit(".", 1)[-1]

from dataclasses import asdict

from django.core.management.base import CommandError

from core.tasks import build_arms, build_bandits, dispatch, job_file, run_eclectic_path

from ._base import EclecticCommand


class Command(EclecticCommand):
    help = "Blends the fixed-arm paths of each seed with every configured bandit"

    def arm_csvs(self, ctx, seed) -> list:
        # arm order fixes the column order of psi
        arms = sorted(build_arms(ctx.config), key=lambda arm: arm.label)
        paths = [job_file(ctx.out_dir, "paths", arm.label, seed) for arm in arms]
        missing = [str(p) for p in paths if not p.is_file()]
        if missing:
            raise CommandError(
                f"missing arm paths for seed {seed} (run backtest first): {', '.join(missing)}", returncode=2
            )
        return [str(p) for p in paths]

    def input_paths(self, ctx):
        paths = super().input_paths(ctx)
        for seed in ctx.seeds:
            for arm in build_arms(ctx.config):
                paths.append(job_file(ctx.out_dir, "paths", arm.label, seed))
        return paths

    def run(self, ctx):
        bandits = build_bandits(ctx.config)
        self.stdout.write(f"Blending with {len(bandits)} bandit configuration(s) x {len(ctx.seeds)} seed(s)...")
        payloads = []
        for seed in ctx.seeds:
            arm_csvs = self.arm_csvs(ctx, seed)
            for bandit in bandits:
                payloads.append(
                    {
                        "config": ctx.config,
                        "seed": seed,
                        "prices": str(ctx.prices),
                        "out_dir": str(ctx.out_dir),
                        "bandit": asdict(bandit),
                        "arm_csvs": arm_csvs,
                    }
                )
        for summary in dispatch(run_eclectic_path, payloads, ctx.jobs):
            ctx.output(summary["csv_path"])
            ctx.summaries.append(summary)

from core.backtest import BENCHMARK, benchmark_path, records_to_frame
from core.tasks import CSV_FLOAT_FORMAT, build_arms, dispatch, load_returns, run_arm_path

from ._base import EclecticCommand


class Command(EclecticCommand):
    help = "Runs every configured fixed arm over every seed and writes one CSV per path"

    def run(self, ctx):
        config = ctx.config
        panel = load_returns(ctx.prices, config["data"]["step"])
        start = config["backtest"]["fit_window_steps"]
        if start >= panel.t:
            raise ValueError(f"panel has {panel.t} steps, need more than the fit window of {start}")

        arms = build_arms(config)
        self.stdout.write(
            f"Backtesting {len(arms)} arm(s) x {len(ctx.seeds)} seed(s) over {panel.t - start} steps..."
        )
        payloads = [
            {
                "config": config,
                "seed": seed,
                "prices": str(ctx.prices),
                "out_dir": str(ctx.out_dir),
                "arm": {"model": arm.model, "objective": arm.objective.label, "v": arm.v},
            }
            for arm in arms
            for seed in ctx.seeds
        ]
        for summary in dispatch(run_arm_path, payloads, ctx.jobs):
            ctx.output(summary["csv_path"])
            ctx.summaries.append(summary)
            if summary["flagged_steps"]:
                self.stdout.write(
                    self.style.WARNING(f"{summary['job_key']}: {summary['flagged_steps']} flagged step(s)")
                )

        benchmark = benchmark_path(panel, start=start)
        path = ctx.output(ctx.out_dir / f"{BENCHMARK}.csv")
        records_to_frame(benchmark, panel.assets, {"arm": BENCHMARK}).to_csv(
            path, index=False, float_format=CSV_FLOAT_FORMAT
        )

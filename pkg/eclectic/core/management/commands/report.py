import pandas as pd

from core import reporting
from core.backtest import BENCHMARK
from core.choices import Scheme
from core.tasks import CSV_FLOAT_FORMAT, load_returns

from ._base import EclecticCommand

SCHEME_DIRS = {Scheme.FIXED: "paths", Scheme.ECLECTIC: "blend"}


class Command(EclecticCommand):
    help = "Writes plot-ready CSVs from the backtest and blend outputs"

    def write(self, ctx, frame, name):
        if frame is None or frame.empty:
            self.stdout.write(self.style.WARNING(f"Skipping {name}: nothing to report"))
            return
        path = ctx.output(ctx.out_dir / "report" / name)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)

    def run(self, ctx):
        for scheme, directory in SCHEME_DIRS.items():
            frame = reporting.read_paths(ctx.out_dir / directory)
            if frame.empty:
                self.stdout.write(self.style.WARNING(f"No {directory}/ CSVs under {ctx.out_dir}"))
                continue
            key = reporting.PATH_KEYS[scheme]
            cumulative = reporting.cumulative_returns(frame, key)
            benchmark_csv = ctx.out_dir / f"{BENCHMARK}.csv"
            if scheme == Scheme.FIXED and benchmark_csv.is_file():
                benchmark = reporting.cumulative_returns(pd.read_csv(benchmark_csv), key)
                cumulative = pd.concat([cumulative, benchmark], ignore_index=True)
            self.write(ctx, cumulative, f"cumulative-returns-{scheme}.csv")
            self.write(ctx, reporting.group_means(frame, scheme, "logit_cosine", key), f"logit-cosine-{scheme}.csv")
            self.write(
                ctx, reporting.group_means(frame, scheme, "logit_turnover", key), f"logit-turnover-{scheme}.csv"
            )
            self.write(ctx, reporting.averaged_weights(frame, scheme), f"weights-{scheme}.csv")
            self.write(ctx, reporting.final_weights(frame, scheme), f"final-weights-{scheme}.csv")
            if scheme == Scheme.ECLECTIC:
                self.write(ctx, reporting.psi_trajectories(frame), "psi.csv")

        panel = load_returns(ctx.prices, ctx.config["data"]["step"])
        self.write(ctx, reporting.rolling_kendall_tau(panel, ctx.config["report"]["tau_window"]), "kendall-tau.csv")

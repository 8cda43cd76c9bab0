from core import reporting
from core.attribution import build_design_matrix, coefficient_table, cv_curve_frame, lasso_cv
from core.choices import Measure, Scheme
from core.exceptions import DataError
from core.tasks import CSV_FLOAT_FORMAT

from ._base import EclecticCommand
from .report import SCHEME_DIRS


class Command(EclecticCommand):
    help = "Attributes a path measure to the configuration factors with a cross-validated LASSO"

    def add_command_arguments(self, parser):
        parser.add_argument("--scheme", choices=Scheme.values, default=Scheme.FIXED)
        parser.add_argument("--measure", choices=Measure.values, default=Measure.LOGIT_COSINE)
        parser.add_argument("--no-interactions", action="store_true", help="main effects only")

    def run(self, ctx):
        scheme = Scheme(ctx.options["scheme"])
        measure = Measure(ctx.options["measure"])
        section = ctx.config["attribution"]

        frame = reporting.read_paths(ctx.out_dir / SCHEME_DIRS[scheme])
        if frame.empty:
            raise DataError(f"no {SCHEME_DIRS[scheme]}/ CSVs under {ctx.out_dir}")
        interactions = [] if ctx.options["no_interactions"] else None
        dataset = build_design_matrix(frame, scheme, measure, interactions=interactions)
        self.stdout.write(
            f"Fitting {len(dataset.column_labels)} columns on {dataset.X.shape[0]} rows "
            f"({section['folds']}-fold CV)..."
        )
        fit = lasso_cv(
            dataset.X,
            dataset.y,
            folds=section["folds"],
            seed=section["cv_seed"],
            unpenalized=() if section["penalize_intercept"] else None,
            column_labels=dataset.column_labels,
            grid_size=section["grid_size"],
            grid_ratio=section["grid_ratio"],
        )
        for flag in fit.flags:
            self.stdout.write(self.style.WARNING(flag))

        out = ctx.out_dir / "attribution"
        out.mkdir(parents=True, exist_ok=True)
        stem = f"{scheme}-{measure}"
        coefficient_table(fit).to_csv(ctx.output(out / f"{stem}.csv"), index=False, float_format=CSV_FLOAT_FORMAT)
        cv_curve_frame(fit).to_csv(ctx.output(out / f"{stem}-cv.csv"), index=False, float_format=CSV_FLOAT_FORMAT)
        self.stdout.write(f"lambda* = {fit.lambda_star:.6g}, {int((fit.beta != 0).sum())} non-zero coefficient(s)")

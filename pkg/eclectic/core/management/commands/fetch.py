from pathlib import Path

from django.conf import settings
from django.core.management.base import CommandError

from core.data import fetch_panel, save_price_csv
from core.synthetic import DEFAULT_SYMBOLS, synthetic_panel

from ._base import EclecticCommand


class Command(EclecticCommand):
    help = "Downloads daily closes (or generates a synthetic panel) into a price CSV"

    requires_config = False

    def add_command_arguments(self, parser):
        parser.add_argument("--source", choices=("http", "synthetic"), default="http")
        parser.add_argument("--symbols", nargs="+", help="asset symbols, e.g. BTCUSDT ETHUSDT")
        parser.add_argument("--start", default="2022-01-01")
        parser.add_argument("--end", help="last timestamp (http source)")
        parser.add_argument("--interval", default=settings.CANDLE_FETCH["interval"])
        parser.add_argument("--endpoint", default=settings.CANDLE_FETCH["endpoint"])
        parser.add_argument("--rows", type=int, default=241, help="price rows (synthetic source)")
        parser.add_argument("--rho", type=float, default=0.6, help="planted correlation (synthetic source)")
        parser.add_argument("--output", default="prices.csv", help="file name inside --out-dir")

    def run(self, ctx):
        options = ctx.options
        if options["source"] == "synthetic":
            symbols = options["symbols"] or list(DEFAULT_SYMBOLS[:4])
            seed = ctx.seeds[0]
            self.stdout.write(f"Generating {options['rows']} synthetic closes for {', '.join(symbols)} (seed {seed})...")
            panel = synthetic_panel(
                options["rows"], d=len(symbols), rho=options["rho"], seed=seed, start=options["start"], symbols=symbols
            )
        else:
            if not options["symbols"] or not options["end"]:
                raise CommandError("the http source needs --symbols and --end", returncode=1)
            self.stdout.write(f"Fetching {options['interval']} candles for {', '.join(options['symbols'])}...")
            panel = fetch_panel(
                options["endpoint"], options["symbols"], options["interval"], options["start"], options["end"]
            )

        path = ctx.output(Path(ctx.out_dir) / options["output"])
        save_price_csv(panel, path)
        self.stdout.write(f"Wrote {panel.prices.shape[0]} rows x {len(panel.assets)} assets to {path}")

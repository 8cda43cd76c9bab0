import io
import json
import tempfile
from pathlib import Path

import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase

from core.models import PathResult, RunManifest, RunStatus

CONFIG = """
[data]
prices = "prices.csv"
step = 2

[scenarios]
n = 100

[objectives]
quantile_levels = [0.1]

[backtest]
fit_window_steps = 10
seeds = [0]
arms = [
    { model = "mvnorm", objective = "LongParity" },
    { model = "mvnorm", objective = "minVariance" },
]

[bandit]
blend_window_steps = 5
decays = [0.9]
policies = ["blend", "switch"]

[attribution]
folds = 3
grid_size = 10

[report]
tau_window = 10
"""


class CommandTestCase(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = Path(self.tmp.name)
        self.config = self.out / "run.toml"
        self.config.write_text(CONFIG, encoding="utf-8")
        self.call("fetch", "--source", "synthetic", "--rows", "60", "--symbols", "AAA", "BBB", "CCC")

    def call(self, name, *args, **kwargs):
        stdout = io.StringIO()
        if name != "fetch":
            args = ("--config", str(self.config)) + args
        call_command(name, *args, "--out-dir", str(self.out), stdout=stdout, **kwargs)
        return stdout.getvalue()


class FetchCommandTests(CommandTestCase):
    def test_synthetic_prices(self):
        frame = pd.read_csv(self.out / "prices.csv")
        self.assertEqual(len(frame), 60)
        self.assertEqual(list(frame.columns[1:]), ["AAA", "BBB", "CCC"])
        self.assertTrue((self.out / "manifest-fetch.json").is_file())

    def test_http_source_needs_symbols(self):
        with self.assertRaises(CommandError) as caught:
            call_command("fetch", "--out-dir", str(self.out), stdout=io.StringIO())
        self.assertEqual(caught.exception.returncode, 1)


class BacktestCommandTests(CommandTestCase):
    def test_one_csv_per_arm_and_seed(self):
        output = self.call("backtest", "--seeds", "3")
        self.assertIn("2 arm(s) x 3 seed(s)", output)
        paths = sorted((self.out / "paths").glob("*.csv"))
        self.assertEqual(len(paths), 6)
        self.assertTrue((self.out / "benchmark.csv").is_file())

        frame = pd.read_csv(paths[0])
        self.assertEqual(len(frame), 29 - 10)
        self.assertEqual({"GenMdl", "ObjFun", "TCAvs", "r_p", "logit_cosine", "logit_turnover"} - set(frame.columns), set())

        run = RunManifest.objects.get(command="backtest")
        self.assertEqual(run.status, RunStatus.COMPLETED)
        self.assertEqual(run.seeds, [0, 1, 2])
        self.assertEqual(PathResult.objects.filter(run=run).count(), 6)
        self.assertIn(str(self.config), run.input_ids)

        manifest = json.loads((self.out / "manifest-backtest.json").read_text())
        self.assertEqual(manifest["config_hash"], run.config_hash)
        self.assertEqual(len(manifest["paths"]), 6)

    def test_rerun_is_byte_identical(self):
        self.call("backtest")
        first = {p.name: p.read_bytes() for p in (self.out / "paths").glob("*.csv")}
        self.call("backtest")
        second = {p.name: p.read_bytes() for p in (self.out / "paths").glob("*.csv")}
        self.assertEqual(first, second)

    def test_invalid_config_exits_with_one(self):
        self.config.write_text("[scenarios]\nn = 5\n", encoding="utf-8")
        with self.assertRaises(CommandError) as caught:
            self.call("backtest")
        self.assertEqual(caught.exception.returncode, 1)
        self.assertIn("scenarios.n", str(caught.exception))

    def test_missing_config_flag(self):
        with self.assertRaises(CommandError) as caught:
            call_command("backtest", "--out-dir", str(self.out), stdout=io.StringIO())
        self.assertEqual(caught.exception.returncode, 1)

    def test_bad_seed_list(self):
        with self.assertRaises(CommandError) as caught:
            self.call("backtest", "--seeds", "a,b")
        self.assertEqual(caught.exception.returncode, 1)

    def test_window_longer_than_panel(self):
        self.config.write_text(CONFIG.replace("fit_window_steps = 10", "fit_window_steps = 100"), encoding="utf-8")
        with self.assertRaises(CommandError) as caught:
            self.call("backtest")
        self.assertEqual(caught.exception.returncode, 2)
        self.assertEqual(RunManifest.objects.get(command="backtest").status, RunStatus.FAILED)


class BlendCommandTests(CommandTestCase):
    def test_blend_without_arm_paths(self):
        with self.assertRaises(CommandError) as caught:
            self.call("blend")
        self.assertEqual(caught.exception.returncode, 2)

    def test_blend_writes_one_csv_per_bandit(self):
        self.call("backtest")
        self.call("blend")
        paths = sorted((self.out / "blend").glob("*.csv"))
        self.assertEqual(len(paths), 2)
        frame = pd.read_csv(paths[0])
        self.assertEqual(len(frame), 29 - 10)
        self.assertEqual(len([c for c in frame.columns if c.startswith("psi")]), 2)
        run = RunManifest.objects.get(command="blend")
        self.assertEqual(PathResult.objects.filter(run=run).count(), 2)


class ReportAndAttributeCommandTests(CommandTestCase):
    def setUp(self):
        super().setUp()
        self.call("backtest", "--seeds", "2")
        self.call("blend", "--seeds", "2")

    def test_report_files(self):
        self.call("report")
        report = self.out / "report"
        for name in (
            "cumulative-returns-fixed.csv",
            "cumulative-returns-eclectic.csv",
            "logit-cosine-fixed.csv",
            "weights-eclectic.csv",
            "psi.csv",
            "kendall-tau.csv",
        ):
            with self.subTest(name=name):
                self.assertTrue((report / name).is_file())
        tau = pd.read_csv(report / "kendall-tau.csv")
        self.assertEqual(set(tau["asset"]), {"BBB", "CCC"})

    def test_attribution_tables(self):
        self.call("attribute", "--scheme", "fixed", "--measure", "logit-cosine")
        table = pd.read_csv(self.out / "attribution" / "fixed-logit-cosine.csv")
        self.assertEqual(list(table.columns), ["coefficient", "value"])
        self.assertIn("intercept", set(table["coefficient"]))
        curve = pd.read_csv(self.out / "attribution" / "fixed-logit-cosine-cv.csv")
        self.assertEqual(len(curve), 3 * 10)

    def test_eclectic_attribution(self):
        output = self.call("attribute", "--scheme", "eclectic", "--measure", "simple-return", "--no-interactions")
        self.assertIn("lambda* =", output)

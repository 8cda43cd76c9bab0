import tempfile
from pathlib import Path
from unittest import mock

import numpy as np
import pandas as pd
from django.test import SimpleTestCase

from core.data import PricePanel, compute_returns, fetch_candles, fetch_panel, load_price_csv, save_price_csv
from core.exceptions import DataError, FetchError
from core.synthetic import synthetic_panel


def _response(rows, status=200, headers=None):
    response = mock.Mock()
    response.status_code = status
    response.headers = headers or {}
    response.json.return_value = rows
    return response


def _candles(start_ms, count, step_ms=60_000, first_close=100.0):
    return [
        [start_ms + i * step_ms, "0", "0", "0", str(first_close + i), "0"]
        for i in range(count)
    ]


class PriceCsvTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, text):
        path = self.dir / "prices.csv"
        path.write_text(text)
        return path

    def test_three_rows_two_assets(self):
        path = self.write(
            "timestamp,AAA,BBB\n"
            "2024-01-01T00:00:00Z,100,50\n"
            "2024-01-02T00:00:00Z,110,55\n"
            "2024-01-03T00:00:00Z,99,44\n"
        )
        panel = load_price_csv(path)
        self.assertEqual((panel.t, panel.d), (3, 2))
        self.assertEqual(panel.assets, ["AAA", "BBB"])
        np.testing.assert_allclose(panel.prices, [[100, 50], [110, 55], [99, 44]])

    def test_nan_row_is_dropped(self):
        path = self.write(
            "timestamp,AAA,BBB\n"
            "2024-01-01T00:00:00Z,100,50\n"
            "2024-01-02T00:00:00Z,NaN,55\n"
            "2024-01-03T00:00:00Z,99,44\n"
        )
        with self.assertLogs("core.data", level="WARNING"):
            panel = load_price_csv(path)
        self.assertEqual(panel.t, 2)

    def test_shuffled_rows_match_sorted(self):
        sorted_path = self.write(
            "timestamp,AAA\n2024-01-01T00:00:00Z,1\n2024-01-02T00:00:00Z,2\n2024-01-03T00:00:00Z,3\n"
        )
        expected = load_price_csv(sorted_path)
        shuffled_path = self.write(
            "timestamp,AAA\n2024-01-03T00:00:00Z,3\n2024-01-01T00:00:00Z,1\n2024-01-02T00:00:00Z,2\n"
        )
        panel = load_price_csv(shuffled_path)
        np.testing.assert_array_equal(panel.prices, expected.prices)
        self.assertTrue(panel.timestamps.equals(expected.timestamps))

    def test_duplicate_timestamp_is_rejected(self):
        path = self.write("timestamp,AAA\n2024-01-01T00:00:00Z,1\n2024-01-01T00:00:00Z,2\n")
        with self.assertRaisesMessage(DataError, "duplicate timestamp"):
            load_price_csv(path)

    def test_malformed_header_is_rejected(self):
        path = self.write("date,AAA\n2024-01-01,1\n2024-01-02,2\n")
        with self.assertRaises(DataError):
            load_price_csv(path)

    def test_single_usable_row_is_rejected(self):
        path = self.write("timestamp,AAA\n2024-01-01T00:00:00Z,1\n2024-01-02T00:00:00Z,-2\n")
        with self.assertRaises(DataError):
            load_price_csv(path)

    def test_save_then_load_keeps_prices(self):
        panel = synthetic_panel(30, d=3, seed=4)
        path = self.dir / "synthetic.csv"
        save_price_csv(panel, path)
        again = load_price_csv(path)
        np.testing.assert_array_equal(again.prices, panel.prices)
        self.assertEqual(again.assets, panel.assets)


class ComputeReturnsTests(SimpleTestCase):
    def panel(self, prices):
        prices = np.asarray(prices, dtype=float)[:, None]
        stamps = pd.date_range("2024-01-01", periods=prices.shape[0], freq="D", tz="UTC")
        return PricePanel(stamps, ["AAA"], prices)

    def test_one_step_returns(self):
        returns = compute_returns(self.panel([100, 110, 99]), 1)
        np.testing.assert_allclose(returns.returns[:, 0], [0.10, -0.10])

    def test_flat_prices_give_zero_returns(self):
        returns = compute_returns(self.panel([100, 100, 100]), 1)
        np.testing.assert_array_equal(returns.returns[:, 0], [0.0, 0.0])

    def test_two_day_step(self):
        returns = compute_returns(self.panel([100, 105, 110.25]), 2)
        self.assertEqual(returns.t, 1)
        self.assertAlmostEqual(returns.returns[0, 0], 0.1025, places=12)
        self.assertEqual(returns.step_days, 2)

    def test_step_must_fit_the_panel(self):
        with self.assertRaises(DataError):
            compute_returns(self.panel([100, 101, 102]), 3)
        with self.assertRaises(DataError):
            compute_returns(self.panel([100, 101, 102]), 0)


class FetchCandlesTests(SimpleTestCase):
    endpoint = (
        "https://example.test/klines?symbol={symbol}&interval={interval}"
        "&startTime={start}&endTime={end}&limit={limit}"
    )

    def fetch(self, session, **kwargs):
        return fetch_candles(
            self.endpoint, "BTCUSDT", "1m", 0, 10**12, session=session, rate_limit_ms=0, **kwargs
        )

    def test_two_candles(self):
        session = mock.Mock()
        session.get.return_value = _response(_candles(0, 2))
        panel = self.fetch(session)
        self.assertEqual(panel.t, 2)
        np.testing.assert_allclose(panel.prices[:, 0], [100.0, 101.0])

    def test_empty_response(self):
        session = mock.Mock()
        session.get.return_value = _response([])
        with self.assertRaisesMessage(FetchError, "empty response"):
            self.fetch(session)

    def test_pagination(self):
        first = _candles(0, 1000)
        second = _candles(first[-1][0] + 60_000, 500, first_close=1100.0)
        session = mock.Mock()
        session.get.side_effect = [_response(first), _response(second)]
        panel = self.fetch(session, page_limit=1000)
        self.assertEqual(panel.t, 1500)
        self.assertEqual(session.get.call_count, 2)
        second_url = session.get.call_args_list[1].args[0]
        self.assertIn(f"startTime={first[-1][0] + 1}", second_url)

    def test_rate_limit_then_success(self):
        session = mock.Mock()
        throttled = _response(None, status=429, headers={"Retry-After": "0"})
        session.get.side_effect = [throttled, _response(_candles(0, 3))]
        with mock.patch("core.data.time.sleep") as sleep, self.assertLogs("core.data", level="WARNING"):
            panel = self.fetch(session)
        sleep.assert_called_once_with(0.0)
        self.assertEqual(panel.t, 3)

    def test_http_error(self):
        session = mock.Mock()
        session.get.return_value = _response(None, status=404)
        with self.assertRaises(FetchError):
            self.fetch(session)

    def test_panel_joins_symbols_on_timestamps(self):
        session = mock.Mock()
        session.get.side_effect = [_response(_candles(0, 4)), _response(_candles(60_000, 4))]
        panel = fetch_panel(self.endpoint, ["AAA", "BBB"], "1m", 0, 10**12, session=session, rate_limit_ms=0)
        self.assertEqual(panel.assets, ["AAA", "BBB"])
        self.assertEqual(panel.t, 3)

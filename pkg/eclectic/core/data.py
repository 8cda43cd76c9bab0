import logging
import time
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import requests
from django.conf import settings
from requests.adapters import HTTPAdapter
from urllib3.util.retry import Retry

from .exceptions import DataError, FetchError

logger = logging.getLogger(__name__)

RATE_LIMIT_STATUSES = (418, 429)


# =====================================================
# PANELS
# =====================================================


@dataclass(frozen=True)
class PricePanel:
    timestamps: pd.DatetimeIndex
    assets: list
    prices: np.ndarray

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        if prices.ndim != 2 or prices.shape != (len(self.timestamps), len(self.assets)):
            raise DataError(
                f"price matrix shape {prices.shape} does not match "
                f"{len(self.timestamps)} timestamps x {len(self.assets)} assets"
            )
        if not self.timestamps.is_monotonic_increasing or self.timestamps.has_duplicates:
            raise DataError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
            raise DataError("prices must be finite and positive")
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "assets", list(self.assets))

    @property
    def t(self) -> int:
        return self.prices.shape[0]

    @property
    def d(self) -> int:
        return self.prices.shape[1]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.prices, index=self.timestamps, columns=self.assets)


@dataclass(frozen=True)
class ReturnPanel:
    timestamps: pd.DatetimeIndex
    assets: list
    returns: np.ndarray
    step_days: int = 1
    flags: tuple = field(default=(), compare=False)

    def __post_init__(self):
        returns = np.asarray(self.returns, dtype=float)
        if returns.ndim != 2:
            raise DataError(f"returns must be 2-D, got shape {returns.shape}")
        object.__setattr__(self, "returns", returns)
        object.__setattr__(self, "assets", list(self.assets))

    @property
    def t(self) -> int:
        return self.returns.shape[0]

    @property
    def d(self) -> int:
        return self.returns.shape[1]

    def slice(self, start: int, stop: int) -> "ReturnPanel":
        return ReturnPanel(
            timestamps=self.timestamps[start:stop],
            assets=self.assets,
            returns=self.returns[start:stop],
            step_days=self.step_days,
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.returns, index=self.timestamps, columns=self.assets)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, step_days: int = 1) -> "ReturnPanel":
        index = pd.DatetimeIndex(pd.to_datetime(frame.index, utc=True))
        return cls(index, list(frame.columns), frame.to_numpy(dtype=float), step_days)


# =====================================================
# CSV
# =====================================================


def _format_timestamp(ts: pd.Timestamp) -> str:
    return ts.isoformat().replace("+00:00", "Z")


def load_price_csv(path) -> PricePanel:
    try:
        raw = pd.read_csv(path, header=None, dtype=str, skip_blank_lines=True)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"cannot read price file {path}: {exc}") from exc

    header = [str(col).strip() for col in raw.iloc[0].tolist()]
    if len(header) < 2 or header[0] != "timestamp":
        raise DataError(f"malformed header in {path}: expected timestamp,<symbols...>")
    symbols = header[1:]
    if any(not s or s == "nan" for s in symbols) or len(set(symbols)) != len(symbols):
        raise DataError(f"malformed header in {path}: empty or repeated symbol")

    body = raw.iloc[1:].reset_index(drop=True)
    stamps = pd.to_datetime(body[0].str.strip(), utc=True, errors="coerce")
    if stamps.isna().any():
        bad = body[0][stamps.isna()].iloc[0]
        raise DataError(f"unparseable timestamp {bad!r} in {path}")
    if stamps.duplicated().any():
        dup = stamps[stamps.duplicated()].iloc[0]
        raise DataError(f"duplicate timestamp {_format_timestamp(dup)} in {path}")

    values = body.iloc[:, 1:].apply(lambda col: pd.to_numeric(col, errors="coerce"))
    frame = pd.DataFrame(values.to_numpy(dtype=float), index=pd.DatetimeIndex(stamps), columns=symbols)
    frame = frame.sort_index()

    usable = np.isfinite(frame.to_numpy()).all(axis=1) & (frame.to_numpy() > 0).all(axis=1)
    dropped = int((~usable).sum())
    if dropped:
        logger.warning("Dropped %d row(s) with missing or non-positive prices from %s", dropped, path)
    frame = frame[usable]
    if len(frame) < 2:
        raise DataError(f"{path} has fewer than 2 usable rows")

    return PricePanel(frame.index, symbols, frame.to_numpy())


def save_price_csv(panel: PricePanel, path) -> None:
    frame = panel.to_frame()
    frame.index = [_format_timestamp(ts) for ts in frame.index]
    frame.index.name = "timestamp"
    frame.to_csv(path, float_format="%.17g")


# =====================================================
# RETURNS
# =====================================================


def compute_returns(panel: PricePanel, step: int) -> ReturnPanel:
    """Simple returns over non-overlapping `step`-row intervals."""
    if step < 1:
        raise DataError(f"step must be a positive integer, got {step}")
    if step >= panel.t:
        raise DataError(f"step {step} must be smaller than the panel length {panel.t}")

    grid = np.arange(0, panel.t, step)
    prices = panel.prices[grid]
    returns = prices[1:] / prices[:-1] - 1.0

    spacing = 1
    if panel.t > 1:
        deltas = np.diff(panel.timestamps.asi8) / 86_400e9
        spacing = max(1, int(round(float(np.median(deltas)))))

    return ReturnPanel(
        timestamps=panel.timestamps[grid[1:]],
        assets=panel.assets,
        returns=returns,
        step_days=step * spacing,
    )


# =====================================================
# CANDLE FETCHER
# =====================================================


def build_session(max_retries: int) -> requests.Session:
    retry = Retry(
        total=max_retries,
        backoff_factor=0.5,
        status_forcelist=(500, 502, 503, 504),
        allowed_methods=("GET",),
        raise_on_status=False,
    )
    session = requests.Session()
    session.mount("https://", HTTPAdapter(max_retries=retry))
    session.mount("http://", HTTPAdapter(max_retries=retry))
    return session


def _to_ms(value) -> int:
    if isinstance(value, (int, np.integer)):
        return int(value)
    ts = pd.Timestamp(value)
    if ts.tzinfo is None:
        ts = ts.tz_localize("UTC")
    return int(ts.value // 1_000_000)


def _rate_limit_pause(response, rate_limit_ms: int) -> float:
    retry_after = response.headers.get("Retry-After") if response.headers else None
    try:
        return float(retry_after)
    except (TypeError, ValueError):
        return rate_limit_ms / 1000.0


def fetch_candles(
    endpoint: str,
    symbol: str,
    interval: str,
    start,
    end,
    *,
    page_limit: int = None,
    rate_limit_ms: int = None,
    max_retries: int = None,
    timeout: float = None,
    session: requests.Session = None,
) -> PricePanel:
    """Page through an exchange-style klines endpoint and keep close prices."""
    conf = settings.CANDLE_FETCH
    page_limit = page_limit or conf["page_limit"]
    rate_limit_ms = conf["rate_limit_ms"] if rate_limit_ms is None else rate_limit_ms
    max_retries = conf["max_retries"] if max_retries is None else max_retries
    timeout = timeout or conf["timeout"]
    session = session or build_session(max_retries)

    start_ms, end_ms = _to_ms(start), _to_ms(end)
    closes = {}
    cursor = start_ms
    throttled = 0

    while cursor <= end_ms:
        url = endpoint.format(
            symbol=symbol, interval=interval, start=cursor, end=end_ms, limit=page_limit
        )
        try:
            response = session.get(url, timeout=timeout)
        except requests.RequestException as exc:
            raise FetchError(f"{symbol}: request failed after retries: {exc}") from exc

        if response.status_code in RATE_LIMIT_STATUSES:
            throttled += 1
            if throttled > max_retries:
                raise FetchError(f"{symbol}: still rate limited after {max_retries} retries")
            pause = _rate_limit_pause(response, rate_limit_ms)
            logger.warning("%s: rate limited (HTTP %s), sleeping %.3fs", symbol, response.status_code, pause)
            time.sleep(pause)
            continue
        if response.status_code >= 400:
            raise FetchError(f"{symbol}: HTTP {response.status_code} from {url}")
        throttled = 0

        try:
            rows = response.json()
        except ValueError as exc:
            raise FetchError(f"{symbol}: response is not JSON") from exc

        if not rows:
            if not closes:
                raise FetchError(f"{symbol}: empty response")
            break

        for row in rows:
            open_time = int(row[0])
            if start_ms <= open_time <= end_ms:
                closes[open_time] = float(row[4])
        logger.debug("%s: fetched page of %d candles from %d", symbol, len(rows), cursor)

        if len(rows) < page_limit:
            break
        cursor = int(rows[-1][0]) + 1

    if not closes:
        raise FetchError(f"{symbol}: empty response")

    stamps = sorted(closes)
    index = pd.DatetimeIndex(pd.to_datetime(stamps, unit="ms", utc=True))
    return PricePanel(index, [symbol], np.array([[closes[s]] for s in stamps]))


def fetch_panel(endpoint, symbols, interval, start, end, **kwargs) -> PricePanel:
    frames = []
    for symbol in symbols:
        frames.append(fetch_candles(endpoint, symbol, interval, start, end, **kwargs).to_frame())
    joined = pd.concat(frames, axis=1, join="inner")
    if len(joined) < 2:
        raise FetchError(f"fewer than 2 common timestamps across {', '.join(symbols)}")
    return PricePanel(joined.index, list(joined.columns), joined.to_numpy())

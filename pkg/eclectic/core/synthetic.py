import numpy as np
import pandas as pd

from .data import PricePanel
from .helpers import substream

DEFAULT_SYMBOLS = ("AAA", "BBB", "CCC", "DDD", "EEE", "FFF", "GGG", "HHH", "III", "JJJ")


def equicorrelation(d: int, rho: float) -> np.ndarray:
    if not -1.0 / max(d - 1, 1) < rho < 1.0:
        raise ValueError(f"equicorrelation {rho} is not positive definite for {d} assets")
    return np.full((d, d), rho) + (1.0 - rho) * np.eye(d)


def synthetic_panel(
    n_prices: int,
    d: int = 4,
    rho: float = 0.6,
    seed: int = 0,
    drift: float = 0.0005,
    vol: float = 0.03,
    start: str = "2022-01-01",
    symbols=None,
) -> PricePanel:
    """Daily closes of a geometric random walk with equicorrelated log returns."""
    if n_prices < 2:
        raise ValueError("a price panel needs at least 2 rows")
    symbols = list(symbols or DEFAULT_SYMBOLS[:d])
    if len(symbols) != d:
        raise ValueError(f"need {d} symbols, got {len(symbols)}")
    rng = substream(seed, "synthetic")
    chol = np.linalg.cholesky(equicorrelation(d, rho))
    shocks = rng.standard_normal((n_prices - 1, d)) @ chol.T
    log_returns = drift - 0.5 * vol**2 + vol * shocks
    log_prices = np.vstack([np.zeros(d), np.cumsum(log_returns, axis=0)])
    prices = 100.0 * np.exp(log_prices)
    timestamps = pd.date_range(start, periods=n_prices, freq="D", tz="UTC")
    return PricePanel(timestamps, symbols, prices)

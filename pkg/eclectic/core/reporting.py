"""Plot-ready frames built from the path CSVs of backtest and blend runs."""

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from .attribution import FACTORS
from .choices import Scheme
from .copula import kendall_tau

logger = logging.getLogger(__name__)

PATH_KEYS = {Scheme.FIXED: "arm", Scheme.ECLECTIC: "config"}


def read_paths(directory) -> pd.DataFrame:
    files = sorted(Path(directory).glob("*.csv"))
    if not files:
        return pd.DataFrame()
    return pd.concat([pd.read_csv(f) for f in files], ignore_index=True)


def _prefixed(frame, prefix):
    return [c for c in frame.columns if c.startswith(prefix)]


def cumulative_returns(frame: pd.DataFrame, key: str) -> pd.DataFrame:
    """Cumulative simple return of every (path, seed) against time."""
    if frame.empty:
        return pd.DataFrame(columns=[key, "seed", "timestamp", "cumulative_return"])
    frame = frame.copy()
    if "seed" not in frame.columns:
        frame["seed"] = -1
    frame["cumulative_return"] = frame.groupby([key, "seed"], sort=False)["r_p"].transform(
        lambda r: np.cumprod(1.0 + r.to_numpy()) - 1.0
    )
    return frame[[key, "seed", "timestamp", "cumulative_return"]].sort_values([key, "seed", "timestamp"])


def group_means(frame: pd.DataFrame, scheme, column: str, key: str) -> pd.DataFrame:
    """Cumulative `column` per path, averaged within each level of each factor."""
    rows = []
    if frame.empty:
        return pd.DataFrame(rows, columns=["factor", "level", "timestamp", column])
    frame = frame.copy()
    frame["_cum"] = frame.groupby([key, "seed"], sort=False)[column].cumsum()
    for factor in FACTORS[Scheme(scheme)]:
        means = frame.groupby([factor, "timestamp"])["_cum"].mean().reset_index()
        means.columns = ["level", "timestamp", column]
        means.insert(0, "factor", factor)
        rows.append(means)
    return pd.concat(rows, ignore_index=True)


def averaged_weights(frame: pd.DataFrame, scheme) -> pd.DataFrame:
    """Decided weights averaged per factor level and timestamp."""
    if frame.empty:
        return pd.DataFrame()
    weights = _prefixed(frame, "w0 ")
    parts = []
    for factor in FACTORS[Scheme(scheme)]:
        means = frame.groupby([factor, "timestamp"])[weights].mean().reset_index()
        means = means.rename(columns={factor: "level"})
        means.insert(0, "factor", factor)
        parts.append(means)
    return pd.concat(parts, ignore_index=True)


def final_weights(frame: pd.DataFrame, scheme) -> pd.DataFrame:
    """Last decided weights of each path averaged per factor level."""
    if frame.empty:
        return pd.DataFrame()
    last = frame[frame["timestamp"] == frame["timestamp"].max()]
    weights = _prefixed(frame, "w0 ")
    parts = []
    for factor in FACTORS[Scheme(scheme)]:
        means = last.groupby(factor)[weights].mean().reset_index().rename(columns={factor: "level"})
        means.insert(0, "factor", factor)
        parts.append(means)
    return pd.concat(parts, ignore_index=True)


def psi_trajectories(frame: pd.DataFrame) -> pd.DataFrame:
    """Blending ratios averaged over configurations and seeds of each policy."""
    psi = _prefixed(frame, "psi ")
    if frame.empty or not psi:
        return pd.DataFrame()
    return frame.groupby(["BldMtd", "timestamp"])[psi].mean().reset_index()


def rolling_kendall_tau(panel, window: int) -> pd.DataFrame:
    """Kendall tau of each asset against the first one over a trailing window of returns."""
    if panel.d < 2:
        return pd.DataFrame(columns=["timestamp", "asset", "tau"])
    if window > panel.t:
        logger.warning("tau window %d exceeds the %d available steps", window, panel.t)
    rows = []
    for row in range(window - 1, panel.t):
        block = panel.returns[row - window + 1 : row + 1]
        stamp = pd.Timestamp(panel.timestamps[row]).strftime("%Y-%m-%dT%H:%M:%SZ")
        for j in range(1, panel.d):
            rows.append(
                {"timestamp": stamp, "asset": panel.assets[j], "tau": kendall_tau(block[:, 0], block[:, j])}
            )
    return pd.DataFrame(rows, columns=["timestamp", "asset", "tau"])

"""
Rolling-window backtests.

Row t of a ReturnPanel is the simple return realized over (t-1, t]. A
decision for row t only sees rows strictly before t; it trades from the
drifted pre-rebalance weights w1 to w0 and then earns

    r_p = w0 . r_t - c * ||w0 - w1||_1

after which w1 for the next row is w0 * (1 + r_t) / (1 + w0 . r_t).
"""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import special

from .bandit import BanditConfig, policy_model, value_model
from .choices import ObjectiveTag
from .containers import ScenarioMatrix
from .exceptions import FitError
from .helpers import equal_long, safe_cosine, substream
from .objectives import ObjectiveContext, ObjectiveKind
from .optimizer import solve_weights
from .scenarios import DEFAULT_MARGINAL_FAMILIES, fit_generative, get_model_spec, simulate_returns

logger = logging.getLogger(__name__)

MEASURE_EPS = 1e-9
RETURN_FLOOR = -1.0 + 1e-9
BENCHMARK = "benchmark"


# =====================================================
# CONFIGURATION
# =====================================================


@dataclass(frozen=True)
class ArmSpec:
    model: str
    objective: ObjectiveKind
    v: float = 1.0

    def __post_init__(self):
        get_model_spec(self.model)
        if not isinstance(self.objective, ObjectiveKind):
            object.__setattr__(self, "objective", ObjectiveKind.parse(self.objective))
        if self.v < 0:
            raise ValueError(f"cost aversion must be non-negative, got {self.v}")

    @property
    def labels(self) -> dict:
        return {
            "GenMdl": f"GenMdl {self.model}",
            "ObjFun": f"ObjFun {self.objective.label}",
            "TCAvs": f"TCAvs {float(self.v):.1f}",
        }

    @property
    def label(self) -> str:
        return f"{self.model} | {self.objective.label} | {float(self.v):.1f}"

    @property
    def needs_scenarios(self) -> bool:
        return self.objective.tag not in (ObjectiveTag.LONG_PARITY, ObjectiveTag.SHORT_PARITY)


@dataclass(frozen=True)
class BacktestConfig:
    rebalance_step_days: int = 2
    fit_window_steps: int = 91
    blend_window_steps: int = 26
    c: float = 0.005
    m: float = 5.0
    n_scenarios: int = 1000
    seeds: tuple = (0,)
    arms: tuple = ()
    bandits: tuple = ()
    marginal_families: tuple = DEFAULT_MARGINAL_FAMILIES
    include_joe: bool = True

    def __post_init__(self):
        for name in ("rebalance_step_days", "fit_window_steps", "blend_window_steps", "m", "n_scenarios"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.c < 0:
            raise ValueError(f"transaction cost must be non-negative, got {self.c}")


@dataclass(frozen=True)
class StepRecord:
    t: str
    w0: np.ndarray
    w1: np.ndarray
    r_p: float
    logit_cosine: float
    logit_turnover: float
    psi: np.ndarray = None
    flags: tuple = ()


# =====================================================
# MEASURES
# =====================================================


def _logit(p) -> float:
    return float(special.logit(min(max(p, MEASURE_EPS), 1.0 - MEASURE_EPS)))


def step_measures(w0, w1_pre, r, c=0.0) -> tuple:
    """(r_p, logit-cosine, logit-turnover) for one rebalance."""
    w0 = np.asarray(w0, dtype=float)
    w1_pre = np.asarray(w1_pre, dtype=float)
    r = np.asarray(r, dtype=float)
    if not w0.shape == w1_pre.shape == r.shape:
        raise ValueError(f"shape mismatch: w0 {w0.shape}, w1 {w1_pre.shape}, r {r.shape}")
    turnover = float(np.abs(w0 - w1_pre).sum())
    r_p = float(w0 @ r) - c * turnover
    # logit((1 + cos) / 2) without clamping keeps the measure antisymmetric in w0
    cosine = safe_cosine(w0, r)
    logit_cosine = float(np.log1p(cosine) - np.log1p(-cosine)) if abs(cosine) < 1.0 else _logit((1.0 + cosine) / 2.0)
    return r_p, logit_cosine, _logit(turnover / 2.0)


def drift_weights(w0, r) -> np.ndarray:
    w0 = np.asarray(w0, dtype=float)
    growth = 1.0 + float(w0 @ r)
    if growth <= 0:
        return w0.copy()
    return w0 * (1.0 + np.asarray(r, dtype=float)) / growth


def _realize(t, w0, w1, r, c, psi=None, flags=()) -> StepRecord:
    r_p, cos_measure, turnover_measure = step_measures(w0, w1, r, c)
    flags = tuple(flags)
    if r_p <= RETURN_FLOOR:
        logger.warning("%s: portfolio return %.6g floored at -1", t, r_p)
        r_p = RETURN_FLOOR
        flags += ("floored",)
    w0 = np.asarray(w0, dtype=float)
    w1 = np.asarray(w1, dtype=float)
    return StepRecord(str(t), w0, w1, r_p, cos_measure, turnover_measure, psi, flags)


def terminal_wealth(records) -> float:
    return float(np.prod([1.0 + rec.r_p for rec in records]))


def _timestamp(panel, row) -> str:
    return pd.Timestamp(panel.timestamps[row]).strftime("%Y-%m-%dT%H:%M:%SZ")


# =====================================================
# FIXED ARMS
# =====================================================


class _ScenarioCache:
    """Fitted scenarios per (model, row), shared by arms on the same path."""

    def __init__(self, cfg: BacktestConfig, panel, seed):
        self.cfg = cfg
        self.panel = panel
        self.seed = seed
        self.entries = {}

    def get(self, model_id, row) -> ScenarioMatrix:
        key = (model_id, row)
        if key not in self.entries:
            self.entries[key] = self._build(model_id, row)
        entry = self.entries[key]
        if isinstance(entry, FitError):
            raise entry
        return entry

    def _build(self, model_id, row):
        cfg = self.cfg
        window = self.panel.returns[row - cfg.fit_window_steps : row]
        try:
            model = fit_generative(
                get_model_spec(model_id),
                window,
                marginal_families=cfg.marginal_families,
                include_joe=cfg.include_joe,
                min_window=cfg.fit_window_steps,
            )
            rng = substream(self.seed, "scenarios", model_id, row)
            return simulate_returns(model, cfg.n_scenarios, rng, asof=_timestamp(self.panel, row))
        except FitError as exc:
            logger.warning("%s at row %d: %s", model_id, row, exc)
            return exc


def _first_row(cfg, panel) -> int:
    if cfg.fit_window_steps >= panel.t:
        raise ValueError(f"panel has {panel.t} steps, need more than the fit window of {cfg.fit_window_steps}")
    return cfg.fit_window_steps


def run_arm_backtest(cfg: BacktestConfig, arm: ArmSpec, panel, seed, cache=None) -> list:
    cache = cache or _ScenarioCache(cfg, panel, seed)
    D = panel.d
    w1 = equal_long(D)
    records = []
    for row in range(_first_row(cfg, panel), panel.t):
        r = panel.returns[row]
        flags = ()
        if arm.needs_scenarios:
            try:
                scenarios = cache.get(arm.model, row)
            except FitError:
                scenarios = None
        else:
            scenarios = ScenarioMatrix(np.zeros((1, D)), model_id=arm.model)

        if scenarios is None:
            w0 = w1.copy()
            flags = ("fit_failed",)
        else:
            ctx = ObjectiveContext(scenarios, w1, c=cfg.c, v=arm.v)
            report = solve_weights(arm.objective, ctx, m=cfg.m, seed=substream(seed, "optimizer", arm.label, row))
            w0 = report.w_star
            flags = report.flags + tuple(scenarios.flags)

        record = _realize(_timestamp(panel, row), w0, w1, r, cfg.c, flags=flags)
        records.append(record)
        w1 = drift_weights(w0, r)
    return records


def run_fixed_backtest(cfg: BacktestConfig, panel, seed=0) -> dict:
    """Records of every configured arm plus the benchmark for one seed."""
    cache = _ScenarioCache(cfg, panel, seed)
    results = {}
    for arm in cfg.arms:
        logger.info("seed %s: arm %s", seed, arm.label)
        results[arm.label] = run_arm_backtest(cfg, arm, panel, seed, cache)
    results[BENCHMARK] = benchmark_path(panel, start=_first_row(cfg, panel))
    return results


def benchmark_path(panel, start=0) -> list:
    """Equal long weights every step, traded without cost."""
    D = panel.d
    w0 = equal_long(D)
    w1 = equal_long(D)
    records = []
    for row in range(start, panel.t):
        r = panel.returns[row]
        records.append(_realize(_timestamp(panel, row), w0, w1, r, 0.0))
        w1 = drift_weights(w0, r)
    return records


# =====================================================
# ECLECTIC
# =====================================================


def run_eclectic_backtest(cfg: BacktestConfig, panel, bandit: BanditConfig, arm_records=None, seed=0) -> list:
    """Blend the fixed arms' decisions with the value/policy models of `bandit`."""
    if arm_records is None:
        arm_records = run_fixed_backtest(cfg, panel, seed)
    arms = [records for label, records in arm_records.items() if label != BENCHMARK]
    if not arms:
        raise ValueError("eclectic backtest needs at least one arm")
    n_steps = len(arms[0])
    if any(len(records) != n_steps for records in arms):
        raise ValueError("arm record series differ in length")

    P = len(arms)
    start = panel.t - n_steps
    window = min(bandit.window, cfg.blend_window_steps)
    history = []
    w1 = equal_long(panel.d)
    records = []
    for k in range(n_steps):
        row = start + k
        if k > 0:
            decided = [records_p[k - 1].w0 for records_p in arms]
            history.append(
                value_model(bandit.similarity, bandit.activation, decided, panel.returns[row - 1], bandit.leaky_relu)
            )
        recent = history[-window:]
        if len(recent) < 2:
            psi = np.full(P, 1.0 / P)
        else:
            _, psi = policy_model(np.array(recent), bandit.gamma, bandit.policy, bandit.activation)
        w0 = psi @ np.array([records_p[k].w0 for records_p in arms])
        r = panel.returns[row]
        records.append(_realize(_timestamp(panel, row), w0, w1, r, cfg.c, psi=psi))
        w1 = drift_weights(w0, r)
    return records


# =====================================================
# CSV
# =====================================================


def records_to_frame(records, assets, labels=None) -> pd.DataFrame:
    rows = []
    for rec in records:
        row = {"timestamp": rec.t}
        row.update({f"w0 {a}": float(x) for a, x in zip(assets, rec.w0)})
        row.update({f"w1 {a}": float(x) for a, x in zip(assets, rec.w1)})
        row.update({"r_p": rec.r_p, "logit_cosine": rec.logit_cosine, "logit_turnover": rec.logit_turnover})
        if rec.psi is not None:
            row.update({f"psi {p}": float(x) for p, x in enumerate(rec.psi)})
        row["flags"] = ";".join(rec.flags)
        rows.append(row)
    frame = pd.DataFrame(rows)
    for key, value in reversed(list((labels or {}).items())):
        frame.insert(1, key, value)
    return frame


def frame_to_records(frame: pd.DataFrame) -> list:
    w0_cols = [c for c in frame.columns if c.startswith("w0 ")]
    w1_cols = [c for c in frame.columns if c.startswith("w1 ")]
    psi_cols = [c for c in frame.columns if c.startswith("psi ")]
    records = []
    for _, row in frame.iterrows():
        flags = row.get("flags", "")
        flags = tuple(f for f in str(flags).split(";") if f and f != "nan")
        records.append(
            StepRecord(
                t=str(row["timestamp"]),
                w0=row[w0_cols].to_numpy(dtype=float),
                w1=row[w1_cols].to_numpy(dtype=float),
                r_p=float(row["r_p"]),
                logit_cosine=float(row["logit_cosine"]),
                logit_turnover=float(row["logit_turnover"]),
                psi=row[psi_cols].to_numpy(dtype=float) if psi_cols else None,
                flags=flags,
            )
        )
    return records


def cumulative_wealth(records) -> np.ndarray:
    return np.cumprod([1.0 + rec.r_p for rec in records])

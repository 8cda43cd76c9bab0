"""
Scenario-based proxy objectives for the one-period rebalancing problem.

All objectives follow the maximization convention: larger is better, "min"
objectives return the negated quantity. The portfolio return scenarios are

    r_p = R w0 - c * v * ||w0 - w1||_1

with R the N x D scenario matrix, w1 the pre-rebalance weights, c the
transaction cost and v the cost aversion.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .choices import ObjectiveTag
from .containers import ScenarioMatrix

logger = logging.getLogger(__name__)

NEG_INF = -np.inf
KELLY_FLOOR = 1e-8
SHARPE_OFFSET = 100.0

QUANTILE_TAGS = (ObjectiveTag.MIN_VAR, ObjectiveTag.MIN_ES)
PARITY_TAGS = (ObjectiveTag.LONG_PARITY, ObjectiveTag.SHORT_PARITY, ObjectiveTag.VARIANCE_PARITY)


@dataclass(frozen=True)
class ObjectiveKind:
    tag: ObjectiveTag
    alpha: float = None
    classical_bl: bool = False

    def __post_init__(self):
        object.__setattr__(self, "tag", ObjectiveTag(self.tag))
        if self.tag in QUANTILE_TAGS:
            if self.alpha is None or not 0.0 < float(self.alpha) < 1.0:
                raise ValueError(f"{self.tag.value} needs a level in (0, 1), got {self.alpha}")
            object.__setattr__(self, "alpha", float(self.alpha))
        elif self.alpha is not None:
            raise ValueError(f"{self.tag.value} takes no level")

    @property
    def label(self) -> str:
        if self.alpha is None:
            return self.tag.value
        return f"{self.tag.value} {self.alpha:g}"

    @property
    def is_parity(self) -> bool:
        return self.tag in PARITY_TAGS

    @classmethod
    def parse(cls, label: str, classical_bl=False) -> "ObjectiveKind":
        parts = str(label).split()
        if not parts or parts[0] not in ObjectiveTag.values:
            raise ValueError(f"unknown objective {label!r}")
        if len(parts) == 1:
            return cls(ObjectiveTag(parts[0]), classical_bl=classical_bl)
        if len(parts) == 2:
            try:
                alpha = float(parts[1])
            except ValueError:
                raise ValueError(f"bad level in objective {label!r}") from None
            return cls(ObjectiveTag(parts[0]), alpha, classical_bl=classical_bl)
        raise ValueError(f"unknown objective {label!r}")

    def __str__(self):
        return self.label


@dataclass(frozen=True)
class ObjectiveContext:
    scenarios: ScenarioMatrix
    w1: np.ndarray
    c: float = 0.005
    v: float = 1.0

    def __post_init__(self):
        if self.c < 0 or self.v < 0:
            raise ValueError(f"cost and cost aversion must be non-negative, got c={self.c}, v={self.v}")
        values = getattr(self.scenarios, "values", self.scenarios)
        values = np.atleast_2d(np.asarray(values, dtype=float))
        w1 = np.asarray(self.w1, dtype=float)
        if w1.shape != (values.shape[1],):
            raise ValueError(f"w1 has shape {w1.shape}, scenarios have {values.shape[1]} assets")
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "_R", values)

    @property
    def R(self) -> np.ndarray:
        return self._R

    @property
    def d(self) -> int:
        return self._R.shape[1]

    def cost(self, w0) -> float:
        return self.c * self.v * float(np.abs(np.asarray(w0, dtype=float) - self.w1).sum())


def portfolio_return_scenarios(w0, ctx: ObjectiveContext) -> np.ndarray:
    w0 = np.asarray(w0, dtype=float)
    if w0.shape != (ctx.d,):
        raise ValueError(f"w0 has shape {w0.shape}, expected ({ctx.d},)")
    return ctx.R @ w0 - ctx.cost(w0)


def kelly_expansion4(w0, ctx: ObjectiveContext) -> float:
    """Fourth-order log(1 + x) expansion summed over every cell of R * w0."""
    X = ctx.R * np.asarray(w0, dtype=float)
    return float(np.sum(X - X**2 / 2.0 + X**3 / 3.0 - X**4 / 4.0))


# =====================================================
# QUANTILES
# =====================================================


def empirical_var(r, alpha) -> float:
    """Lower empirical alpha-quantile (order statistic at ceil(alpha N))."""
    r = np.sort(np.asarray(r, dtype=float))
    k = max(1, math.ceil(alpha * r.size - 1e-12))
    return float(r[k - 1])


def empirical_es(r, alpha) -> float:
    """Mean of the alpha-tail, the boundary scenario taken with fractional weight."""
    r = np.sort(np.asarray(r, dtype=float))
    n = r.size
    tail = alpha * n
    k = max(1, math.ceil(tail - 1e-12))
    total = r[: k - 1].sum() + (tail - (k - 1)) * r[k - 1]
    return float(total / tail)


# =====================================================
# EVALUATION
# =====================================================


def _downside(r):
    below = r[r < 0]
    if below.size == 0:
        logger.debug("empty downside set, conditional measure set to 0")
    return below


def _ratio(mean, sigma) -> float:
    if not sigma > 0:
        return NEG_INF
    inner = SHARPE_OFFSET + mean / sigma
    if inner <= 0:
        return NEG_INF
    return math.log(inner)


def _bernado_ledoit(r, classical) -> float:
    below = _downside(r)
    if classical:
        # gain/loss ratio E[r+] / E[r-]
        loss = float(np.maximum(-r, 0.0).mean())
        gain = float(np.maximum(r, 0.0).mean())
        if loss == 0.0 or gain == 0.0:
            return NEG_INF if gain == 0.0 else math.inf
        return math.log(gain) - math.log(loss)
    abs_mean = float(np.abs(r).mean())
    if abs_mean == 0.0:
        return NEG_INF
    down = float(np.abs(below).mean()) if below.size else 0.0
    return math.log(abs_mean) - math.log(abs_mean + down)


def _parity(kind: ObjectiveKind, w0, ctx: ObjectiveContext) -> float:
    ones = np.ones(ctx.d)
    if kind.tag == ObjectiveTag.LONG_PARITY:
        target = w0
    elif kind.tag == ObjectiveTag.SHORT_PARITY:
        target, ones = w0, -ones
    else:
        contrib = ctx.R * w0 - ctx.c * ctx.v * np.abs(w0 - ctx.w1)
        target = w0 * contrib.std(axis=0) ** 2
    norm = np.linalg.norm(target)
    if norm == 0.0:
        return NEG_INF
    return float(target @ ones / (norm * np.linalg.norm(ones)))


def evaluate_objective(kind: ObjectiveKind, w0, ctx: ObjectiveContext) -> float:
    w0 = np.asarray(w0, dtype=float)
    tag = kind.tag
    if kind.is_parity:
        return _parity(kind, w0, ctx)
    if tag == ObjectiveTag.KELLY_EXPANSION4:
        return kelly_expansion4(w0, ctx) / ctx.R.shape[0] - ctx.cost(w0)

    r = portfolio_return_scenarios(w0, ctx)
    if tag == ObjectiveTag.KELLY:
        growth = 1.0 + r
        if growth.min() <= KELLY_FLOOR:
            return NEG_INF
        return float(np.log(growth).mean())
    if tag == ObjectiveTag.MIN_VARIANCE:
        return -float(r.var())
    if tag == ObjectiveTag.MAX_EXP_RETN:
        return float(r.mean())
    if tag == ObjectiveTag.MIN_DOWNSIDE_FREQ:
        return -float((r < 0).mean())
    if tag == ObjectiveTag.MIN_DOWNSIDE_VARIANCE:
        below = _downside(r)
        return -float((below**2).mean()) if below.size else 0.0
    if tag == ObjectiveTag.MAX_SHARPE:
        return _ratio(float(r.mean()), float(r.std()))
    if tag == ObjectiveTag.MAX_SORTINO:
        below = _downside(r)
        sigma = math.sqrt(float((below**2).mean())) if below.size else 0.0
        return _ratio(float(r.mean()), sigma)
    if tag == ObjectiveTag.MAX_BERNADO_LEDOIT:
        return _bernado_ledoit(r, kind.classical_bl)
    if tag == ObjectiveTag.MIN_VAR:
        return empirical_var(r, kind.alpha)
    if tag == ObjectiveTag.MIN_ES:
        return empirical_es(r, kind.alpha)
    raise ValueError(f"unhandled objective {kind.label}")

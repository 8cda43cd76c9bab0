"""
Performance attribution: binary design matrices and a cross-validated LASSO

    min_beta (1 / 2n) ||y - X beta||^2 + lambda * sum_j |beta_j|

fitted by cyclic coordinate descent with the intercept left unpenalized.
"""

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from sklearn.model_selection import KFold

from .choices import ActivationKind, Measure, Policy, Scheme, SimilarityKind
from .exceptions import DataError
from .objectives import ObjectiveKind
from .scenarios import get_model_spec

logger = logging.getLogger(__name__)

INTERCEPT = "intercept"
KKT_TOL = 1e-7
MAX_SWEEPS = 100_000

FACTORS = {
    Scheme.FIXED: ("GenMdl", "ObjFun", "TCAvs"),
    Scheme.ECLECTIC: ("SimiMtd", "ActFun", "Decay", "BldMtd"),
}

MEASURE_COLUMNS = {
    Measure.SIMPLE_RETURN: "r_p",
    Measure.LOGIT_COSINE: "logit_cosine",
    Measure.LOGIT_TURNOVER: "logit_turnover",
}


def _check_float(value):
    float(value)


def _check_in(choices):
    def check(value):
        if value not in choices.values:
            raise ValueError(value)

    return check


LEVEL_CHECKS = {
    "GenMdl": get_model_spec,
    "ObjFun": ObjectiveKind.parse,
    "TCAvs": _check_float,
    "SimiMtd": _check_in(SimilarityKind),
    "ActFun": _check_in(ActivationKind),
    "Decay": _check_float,
    "BldMtd": _check_in(Policy),
}


@dataclass(frozen=True)
class AttributionDataset:
    X: np.ndarray
    y: np.ndarray
    column_labels: tuple

    @property
    def ones_per_row(self) -> np.ndarray:
        return self.X.sum(axis=1).astype(int)


@dataclass(frozen=True)
class LassoFit:
    beta: np.ndarray
    lambda_star: float
    lambdas: np.ndarray
    cv_mse: np.ndarray
    column_labels: tuple = ()
    flags: tuple = field(default=(), compare=False)


# =====================================================
# DESIGN MATRIX
# =====================================================


def _check_level(factor, label):
    prefix = f"{factor} "
    if not isinstance(label, str) or not label.startswith(prefix):
        raise DataError(f"{factor} label {label!r} must start with {prefix!r}")
    try:
        LEVEL_CHECKS[factor](label[len(prefix) :])
    except ValueError:
        raise DataError(f"unknown {factor} level {label!r}") from None


def build_design_matrix(records, scheme, measure, interactions=None) -> AttributionDataset:
    """One-hot design over the scheme's factors plus pairwise interactions.

    `records` is a frame (or iterable of mappings) holding one column per
    factor with labels such as "GenMdl mvnorm" and the measure columns
    written by the backtests. `interactions` restricts the factor pairs.
    """
    scheme = Scheme(scheme)
    frame = pd.DataFrame(list(records) if not isinstance(records, pd.DataFrame) else records)
    if frame.empty:
        raise DataError("no records to attribute")
    factors = FACTORS[scheme]
    target = MEASURE_COLUMNS[Measure(measure)]
    missing = [c for c in (*factors, target) if c not in frame.columns]
    if missing:
        raise DataError(f"records lack columns {missing}")

    for factor in factors:
        for label in frame[factor].unique():
            _check_level(factor, label)

    pairs = list(itertools.combinations(factors, 2)) if interactions is None else [tuple(p) for p in interactions]
    blocks = {INTERCEPT: np.ones(len(frame))}
    for factor in factors:
        for level in sorted(frame[factor].unique()):
            blocks[level] = (frame[factor] == level).to_numpy(dtype=float)
    for a, b in pairs:
        combos = frame[a] + " : " + frame[b]
        for level in sorted(combos.unique()):
            blocks[level] = (combos == level).to_numpy(dtype=float)

    labels = tuple(blocks)
    X = np.column_stack([blocks[label] for label in labels])
    y = frame[target].to_numpy(dtype=float)
    return AttributionDataset(X, y, labels)


# =====================================================
# LASSO
# =====================================================


def _unpenalized(X, unpenalized):
    # only the intercept; single-level factor columns are all ones too and stay penalized
    if unpenalized is None:
        ones = [j for j in range(X.shape[1]) if np.all(X[:, j] == 1.0)]
        return tuple(ones[:1])
    return tuple(unpenalized)


def _penalties(X, lam, unpenalized):
    penalty = np.full(X.shape[1], float(lam))
    penalty[list(_unpenalized(X, unpenalized))] = 0.0
    return penalty


def soft_threshold(z, lam):
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


def _violation(grad, beta, penalty) -> float:
    active = beta != 0
    violation = np.where(active, np.abs(grad - penalty * np.sign(beta)), np.maximum(np.abs(grad) - penalty, 0.0))
    return float(violation.max(initial=0.0))


def kkt_violation(X, y, beta, lam, unpenalized=None) -> float:
    grad = X.T @ (y - X @ beta) / X.shape[0]
    return _violation(grad, beta, _penalties(X, lam, unpenalized))


def lasso_objective(X, y, beta, lam, unpenalized=None) -> float:
    residual = y - X @ beta
    penalty = _penalties(X, lam, unpenalized)
    return float(residual @ residual / (2 * X.shape[0]) + penalty @ np.abs(beta))


def lasso_fit(X, y, lam, unpenalized=None, beta0=None, tol=KKT_TOL) -> np.ndarray:
    if lam < 0:
        raise ValueError(f"lambda must be non-negative, got {lam}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    penalty = _penalties(X, lam, unpenalized)
    col_sq = (X**2).sum(axis=0) / n
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=float)
    residual = y - X @ beta
    for _ in range(MAX_SWEEPS):
        for j in range(p):
            if col_sq[j] == 0.0:
                beta[j] = 0.0
                continue
            rho = X[:, j] @ residual / n + col_sq[j] * beta[j]
            new = soft_threshold(rho, penalty[j]) / col_sq[j]
            if new != beta[j]:
                residual -= X[:, j] * (new - beta[j])
                beta[j] = new
        if _violation(X.T @ residual / n, beta, penalty) < tol:
            return beta
    logger.warning("coordinate descent stopped after %d sweeps (lambda=%g)", MAX_SWEEPS, lam)
    return beta


def lambda_max(X, y, unpenalized=None) -> float:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    free = list(_unpenalized(X, unpenalized))
    residual = y
    if free:
        coef, *_ = np.linalg.lstsq(X[:, free], y, rcond=None)
        residual = y - X[:, free] @ coef
    penalized = [j for j in range(X.shape[1]) if j not in free]
    if not penalized:
        return 0.0
    return float(np.max(np.abs(X[:, penalized].T @ residual)) / X.shape[0])


def lambda_grid(X, y, size=100, ratio=1e-4, unpenalized=None) -> np.ndarray:
    top = lambda_max(X, y, unpenalized)
    if top <= 0.0:
        return np.array([0.0])
    return np.logspace(np.log10(top), np.log10(top * ratio), size)


def lasso_path(X, y, lambdas, unpenalized=None) -> np.ndarray:
    """Warm-started fits along `lambdas` (taken in decreasing order); one row per lambda."""
    lambdas = np.asarray(lambdas, dtype=float)
    order = np.argsort(-lambdas, kind="stable")
    betas = np.zeros((lambdas.size, np.asarray(X).shape[1]))
    beta = None
    for i in order:
        beta = lasso_fit(X, y, lambdas[i], unpenalized, beta0=beta)
        betas[i] = beta
    return betas


def lasso_cv(
    X, y, folds=7, grid=None, seed=0, unpenalized=None, column_labels=(), grid_size=100, grid_ratio=1e-4
) -> LassoFit:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if n < folds:
        raise ValueError(f"need at least {folds} rows for {folds}-fold cross-validation, got {n}")
    if unpenalized is None:
        labels = list(column_labels)
        unpenalized = (labels.index(INTERCEPT),) if INTERCEPT in labels else _unpenalized(X, None)
    lambdas = lambda_grid(X, y, grid_size, grid_ratio, unpenalized) if grid is None else np.asarray(grid, dtype=float)

    splitter = KFold(n_splits=folds, shuffle=True, random_state=seed)
    cv_mse = np.zeros((folds, lambdas.size))
    flags = []
    for k, (train, test) in enumerate(splitter.split(X)):
        if np.ptp(y[train]) == 0.0:
            logger.warning("fold %d has a constant response", k)
            flags.append(f"degenerate_fold:{k}")
        betas = lasso_path(X[train], y[train], lambdas, unpenalized)
        residuals = y[test][None, :] - betas @ X[test].T
        cv_mse[k] = (residuals**2).mean(axis=1)

    lambda_star = float(np.mean([lambdas[int(np.argmin(row))] for row in cv_mse]))
    beta = lasso_fit(X, y, lambda_star, unpenalized)
    return LassoFit(beta, lambda_star, lambdas, cv_mse, tuple(column_labels), tuple(flags))


def coefficient_table(fit: LassoFit, column_labels=None) -> pd.DataFrame:
    """Non-zero coefficients sorted by value, largest first."""
    labels = list(column_labels if column_labels is not None else fit.column_labels)
    frame = pd.DataFrame({"coefficient": labels, "value": fit.beta})
    frame = frame[(frame["value"] != 0.0) | (frame["coefficient"] == INTERCEPT)]
    return frame.sort_values("value", ascending=False, kind="stable").reset_index(drop=True)


def cv_curve_frame(fit: LassoFit) -> pd.DataFrame:
    rows = [
        {"fold": k, "lambda": float(lam), "mse": float(fit.cv_mse[k, i])}
        for k in range(fit.cv_mse.shape[0])
        for i, lam in enumerate(fit.lambdas)
    ]
    return pd.DataFrame(rows)

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .choices import MarginalFamily
from .exceptions import FitError
from .helpers import clamp_unit

logger = logging.getLogger(__name__)

MIN_SAMPLE = 20

# number of free parameters per parametric family
N_PARAMS = {
    MarginalFamily.GAUSSIAN: 2,
    MarginalFamily.STUDENT_T: 3,
    MarginalFamily.NONCENTRAL_T: 4,
    MarginalFamily.JOHNSON_SU: 4,
    MarginalFamily.TUKEY_LAMBDA: 3,
    MarginalFamily.LAPLACE: 2,
    MarginalFamily.ASYMMETRIC_LAPLACE: 3,
}

FAMILY_ORDER = list(MarginalFamily)


@dataclass(frozen=True)
class MarginalModel:
    family: MarginalFamily
    params: tuple
    aic: float
    n_obs: int
    flags: tuple = field(default=(), compare=False)

    @property
    def k(self) -> int:
        return N_PARAMS.get(self.family, 0)

    def frozen(self):
        return getattr(stats, self.family.value)(*self.params)

    def _grid(self):
        x = np.asarray(self.params, dtype=float)
        p = np.arange(1, x.size + 1) / (x.size + 1.0)
        return x, p

    def cdf(self, x):
        if self.family == MarginalFamily.EMPIRICAL:
            xs, ps = self._grid()
            return np.interp(x, xs, ps)
        return clamp_unit(self.frozen().cdf(x))

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if np.any((u <= 0.0) | (u >= 1.0)):
            raise ValueError("ppf is defined on the open interval (0, 1)")
        if self.family == MarginalFamily.EMPIRICAL:
            xs, ps = self._grid()
            return np.interp(u, ps, xs)
        return self.frozen().ppf(u)

    def logpdf(self, x):
        if self.family == MarginalFamily.EMPIRICAL:
            raise FitError("empirical marginals carry no density", stage="marginal")
        return self.frozen().logpdf(x)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "params": [float(p) for p in self.params],
            "aic": None if not np.isfinite(self.aic) else float(self.aic),
            "n_obs": int(self.n_obs),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MarginalModel":
        aic = payload.get("aic")
        return cls(
            family=MarginalFamily(payload["family"]),
            params=tuple(payload["params"]),
            aic=float("inf") if aic is None else float(aic),
            n_obs=int(payload["n_obs"]),
        )


class _TrackedSimplex:
    """Optimizer hook for scipy's generic `fit` that keeps the result."""

    def __init__(self):
        self.result = None

    def __call__(self, func, x0, args=(), disp=0):
        n = len(x0)
        self.result = optimize.minimize(
            func,
            x0,
            args=args,
            method="Nelder-Mead",
            options={"maxiter": 3000 * n, "maxfev": 3000 * n, "xatol": 1e-8, "fatol": 1e-9},
        )
        return self.result.x


def fit_marginal(sample, family) -> MarginalModel:
    family = MarginalFamily(family)
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < MIN_SAMPLE:
        raise FitError(f"need at least {MIN_SAMPLE} observations, got {x.size}", stage="marginal")
    if not np.all(np.isfinite(x)):
        raise FitError("sample contains non-finite values", stage="marginal")
    if np.ptp(x) == 0.0:
        raise FitError("constant sample (degenerate scale)", stage="marginal", flags=("degenerate",))

    if family == MarginalFamily.EMPIRICAL:
        return MarginalModel(family, tuple(np.sort(x)), float("inf"), x.size)

    dist = getattr(stats, family.value)
    tracker = _TrackedSimplex()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        params = tuple(float(p) for p in dist.fit(x, optimizer=tracker))
        loglik = float(np.sum(dist.logpdf(x, *params)))

    flags = []
    if tracker.result is not None and not tracker.result.success:
        flags.append("nonconvergence")
    if not np.isfinite(loglik):
        flags.append("nonfinite_loglik")
    if flags:
        logger.warning("%s marginal fit failed: %s", family.label, ", ".join(flags))
        raise FitError(f"{family.label} fit did not converge", stage="marginal", params=params, flags=flags)

    aic = 2.0 * N_PARAMS[family] - 2.0 * loglik
    return MarginalModel(family, params, aic, x.size)


def select_marginal(sample, families) -> MarginalModel:
    """Lowest-AIC successful fit; ties go to fewer parameters, then family order."""
    fits = []
    errors = []
    for family in families:
        try:
            fits.append(fit_marginal(sample, family))
        except FitError as exc:
            errors.append(exc)
    if not fits:
        raise FitError(
            "no marginal family could be fitted: " + "; ".join(str(e) for e in errors),
            stage="marginal",
            flags=tuple(f for e in errors for f in e.flags),
        )
    return min(fits, key=lambda m: (m.aic, m.k, FAMILY_ORDER.index(m.family)))


def fit_marginals(matrix, families) -> list:
    matrix = np.asarray(matrix, dtype=float)
    models = []
    for d in range(matrix.shape[1]):
        try:
            models.append(select_marginal(matrix[:, d], families))
        except FitError as exc:
            raise exc.at(f"column {d}")
    return models


def marginal_cdf(m: MarginalModel, x):
    return m.cdf(x)


def marginal_ppf(m: MarginalModel, u):
    return m.ppf(u)


def pseudo_observations(matrix) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    return stats.rankdata(matrix, method="average", axis=0) / (matrix.shape[0] + 1.0)

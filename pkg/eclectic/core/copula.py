"""
Bivariate pair copulas and multivariate elliptical copulas.

Conventions: C(u, v) is the copula CDF and the h-function is the
conditional distribution h(u | v) = dC(u, v)/dv. Rotations act on the
base (0 degree) copula C0:

     90:  C(u, v) = v - C0(1 - u, v)
    180:  C(u, v) = u + v - 1 + C0(1 - u, 1 - v)
    270:  C(u, v) = u - C0(u, 1 - v)
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special, stats

from .choices import CopulaFamily, CopulaPreset
from .exceptions import FitError
from .helpers import as_generator, clamp_unit

logger = logging.getLogger(__name__)

MIN_PAIR_OBS = 30
ROTATIONS = (0, 90, 180, 270)
T_NU_CAP = 50.0
PD_FLOOR = 1e-8

BOUNDS = {
    CopulaFamily.GAUSSIAN: (-0.999, 0.999),
    CopulaFamily.CLAYTON: (1e-4, 28.0),
    CopulaFamily.GUMBEL: (1.0, 17.0),
    CopulaFamily.FRANK: (-35.0, 35.0),
    CopulaFamily.JOE: (1.0, 30.0),
}
T_BOUNDS = ((-0.999, 0.999), (2.001, T_NU_CAP))

N_PARAMS = {
    CopulaFamily.INDEPENDENCE: 0,
    CopulaFamily.GAUSSIAN: 1,
    CopulaFamily.STUDENT_T: 2,
    CopulaFamily.CLAYTON: 1,
    CopulaFamily.GUMBEL: 1,
    CopulaFamily.FRANK: 1,
    CopulaFamily.JOE: 1,
}

ARCHIMEDEAN_ROTATED = (CopulaFamily.CLAYTON, CopulaFamily.GUMBEL, CopulaFamily.JOE)
FAMILY_ORDER = list(CopulaFamily)


def preset_families(preset, include_joe=True) -> frozenset:
    preset = CopulaPreset(preset)
    elliptical = {CopulaFamily.GAUSSIAN, CopulaFamily.STUDENT_T}
    archimedean = {CopulaFamily.CLAYTON, CopulaFamily.GUMBEL, CopulaFamily.FRANK}
    if include_joe:
        archimedean.add(CopulaFamily.JOE)
    chosen = {
        CopulaPreset.ELLIPTICAL: elliptical,
        CopulaPreset.ARCHIMEDEAN: archimedean,
        CopulaPreset.ALLFAM: elliptical | archimedean,
    }[preset]
    return frozenset(chosen | {CopulaFamily.INDEPENDENCE})


# =====================================================
# KENDALL'S TAU
# =====================================================


def kendall_tau(x, y) -> float:
    """Tie-adjusted (tau-b) rank correlation; constant input gives 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("kendall_tau needs two vectors of equal length >= 2")
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        logger.warning("kendall_tau: constant input, returning 0")
        return 0.0
    return float(stats.kendalltau(x, y, variant="b").statistic)


def kendall_matrix(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    D = u.shape[1]
    tau = np.eye(D)
    for i in range(D):
        for j in range(i + 1, D):
            tau[i, j] = tau[j, i] = kendall_tau(u[:, i], u[:, j])
    return tau


# =====================================================
# BASE (UNROTATED) FAMILIES
# =====================================================


def _gauss_h(u, v, rho):
    x, y = special.ndtri(u), special.ndtri(v)
    return special.ndtr((x - rho * y) / np.sqrt(1.0 - rho**2))


def _gauss_hinv(p, v, rho):
    return special.ndtr(special.ndtri(p) * np.sqrt(1.0 - rho**2) + rho * special.ndtri(v))


def _gauss_logpdf(u, v, rho):
    x, y = special.ndtri(u), special.ndtri(v)
    r2 = 1.0 - rho**2
    return -0.5 * np.log(r2) - (rho**2 * (x**2 + y**2) - 2.0 * rho * x * y) / (2.0 * r2)


def _gauss_cdf(u, v, rho):
    x = np.column_stack([special.ndtri(u), special.ndtri(v)])
    return stats.multivariate_normal(cov=[[1.0, rho], [rho, 1.0]]).cdf(x)


def _t_scale(y, rho, nu):
    return np.sqrt((nu + y**2) * (1.0 - rho**2) / (nu + 1.0))


def _t_h(u, v, rho, nu):
    x, y = stats.t.ppf(u, nu), stats.t.ppf(v, nu)
    return stats.t.cdf((x - rho * y) / _t_scale(y, rho, nu), nu + 1.0)


def _t_hinv(p, v, rho, nu):
    y = stats.t.ppf(v, nu)
    x = stats.t.ppf(p, nu + 1.0) * _t_scale(y, rho, nu) + rho * y
    return stats.t.cdf(x, nu)


def _t_logpdf(u, v, rho, nu):
    x, y = stats.t.ppf(u, nu), stats.t.ppf(v, nu)
    r2 = 1.0 - rho**2
    q = (x**2 + y**2 - 2.0 * rho * x * y) / (nu * r2)
    return (
        special.gammaln((nu + 2.0) / 2.0)
        + special.gammaln(nu / 2.0)
        - 2.0 * special.gammaln((nu + 1.0) / 2.0)
        - 0.5 * np.log(r2)
        - (nu + 2.0) / 2.0 * np.log1p(q)
        + (nu + 1.0) / 2.0 * (np.log1p(x**2 / nu) + np.log1p(y**2 / nu))
    )


def _t_cdf(u, v, rho, nu):
    x = np.column_stack([stats.t.ppf(u, nu), stats.t.ppf(v, nu)])
    return stats.multivariate_t(shape=[[1.0, rho], [rho, 1.0]], df=nu).cdf(x)


def _clayton_a(u, v, theta):
    return np.exp(-theta * np.log(u)) + np.exp(-theta * np.log(v)) - 1.0


def _clayton_h(u, v, theta):
    return np.exp(-(theta + 1.0) * np.log(v) - (1.0 / theta + 1.0) * np.log(_clayton_a(u, v, theta)))


def _clayton_hinv(p, v, theta):
    inner = np.exp(-theta / (theta + 1.0) * (np.log(p) + (theta + 1.0) * np.log(v)))
    return np.exp(-np.log(inner + 1.0 - np.exp(-theta * np.log(v))) / theta)


def _clayton_logpdf(u, v, theta):
    return (
        np.log1p(theta)
        - (theta + 1.0) * (np.log(u) + np.log(v))
        - (2.0 + 1.0 / theta) * np.log(_clayton_a(u, v, theta))
    )


def _clayton_cdf(u, v, theta):
    return np.exp(-np.log(_clayton_a(u, v, theta)) / theta)


def _gumbel_parts(u, v, theta):
    x, y = -np.log(u), -np.log(v)
    A = x**theta + y**theta
    return x, y, A, A ** (1.0 / theta)


def _gumbel_h(u, v, theta):
    _, y, A, a = _gumbel_parts(u, v, theta)
    return np.exp(-a + (1.0 / theta - 1.0) * np.log(A) + (theta - 1.0) * np.log(y) - np.log(v))


def _gumbel_logpdf(u, v, theta):
    x, y, A, a = _gumbel_parts(u, v, theta)
    return (
        -a
        - np.log(u)
        - np.log(v)
        + (theta - 1.0) * (np.log(x) + np.log(y))
        + (2.0 / theta - 2.0) * np.log(A)
        + np.log1p((theta - 1.0) / a)
    )


def _gumbel_cdf(u, v, theta):
    return np.exp(-_gumbel_parts(u, v, theta)[3])


def _frank_h(u, v, theta):
    eu, ev = np.expm1(-theta * u), np.expm1(-theta * v)
    return np.exp(-theta * v) * eu / (np.expm1(-theta) + eu * ev)


def _frank_hinv(p, v, theta):
    return -np.log1p(p * np.expm1(-theta) / (p + (1.0 - p) * np.exp(-theta * v))) / theta


def _frank_logpdf(u, v, theta):
    g = -np.expm1(-theta)
    denom = g - (-np.expm1(-theta * u)) * (-np.expm1(-theta * v))
    return np.log(theta * g) - theta * (u + v) - 2.0 * np.log(np.abs(denom))


def _frank_cdf(u, v, theta):
    return -np.log1p(np.expm1(-theta * u) * np.expm1(-theta * v) / np.expm1(-theta)) / theta


def _joe_s(u, v, theta):
    ub, vb = (1.0 - u) ** theta, (1.0 - v) ** theta
    return ub, vb, ub + vb - ub * vb


def _joe_h(u, v, theta):
    ub, _, S = _joe_s(u, v, theta)
    return S ** (1.0 / theta - 1.0) * (1.0 - v) ** (theta - 1.0) * (1.0 - ub)


def _joe_logpdf(u, v, theta):
    _, _, S = _joe_s(u, v, theta)
    return (
        (1.0 / theta - 2.0) * np.log(S)
        + (theta - 1.0) * (np.log1p(-u) + np.log1p(-v))
        + np.log(theta - 1.0 + S)
    )


def _joe_cdf(u, v, theta):
    return 1.0 - _joe_s(u, v, theta)[2] ** (1.0 / theta)


def _indep_h(u, v):
    return u


def _indep_logpdf(u, v):
    return np.zeros(np.broadcast(u, v).shape)


def _indep_cdf(u, v):
    return u * v


_BASE = {
    CopulaFamily.INDEPENDENCE: (_indep_h, _indep_h, _indep_logpdf, _indep_cdf),
    CopulaFamily.GAUSSIAN: (_gauss_h, _gauss_hinv, _gauss_logpdf, _gauss_cdf),
    CopulaFamily.STUDENT_T: (_t_h, _t_hinv, _t_logpdf, _t_cdf),
    CopulaFamily.CLAYTON: (_clayton_h, _clayton_hinv, _clayton_logpdf, _clayton_cdf),
    CopulaFamily.GUMBEL: (_gumbel_h, None, _gumbel_logpdf, _gumbel_cdf),
    CopulaFamily.FRANK: (_frank_h, _frank_hinv, _frank_logpdf, _frank_cdf),
    CopulaFamily.JOE: (_joe_h, None, _joe_logpdf, _joe_cdf),
}


def _bisect_hinv(h, p, v, params, iterations=64):
    p, v = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(v, dtype=float))
    lo = np.full(p.shape, 1e-12)
    hi = np.full(p.shape, 1.0 - 1e-12)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        below = h(mid, v, *params) < p
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def _base_h(family, u, v, params):
    return _BASE[family][0](u, v, *params)


def _base_hinv(family, p, v, params):
    closed = _BASE[family][1]
    if closed is not None:
        return closed(p, v, *params)
    return _bisect_hinv(_BASE[family][0], p, v, params)


# =====================================================
# PAIR COPULA MODEL
# =====================================================


@dataclass(frozen=True)
class BicopModel:
    family: CopulaFamily = CopulaFamily.INDEPENDENCE
    rotation: int = 0
    params: tuple = ()
    aic: float = 0.0
    loglik: float = 0.0
    flags: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.rotation not in ROTATIONS:
            raise ValueError(f"rotation must be one of {ROTATIONS}, got {self.rotation}")

    @property
    def is_independence(self) -> bool:
        return self.family == CopulaFamily.INDEPENDENCE

    def to_dict(self) -> dict:
        return {
            "family": CopulaFamily(self.family).value,
            "rotation": self.rotation,
            "params": [float(p) for p in self.params],
            "aic": float(self.aic),
            "loglik": float(self.loglik),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "BicopModel":
        return cls(
            family=CopulaFamily(payload["family"]),
            rotation=int(payload["rotation"]),
            params=tuple(payload["params"]),
            aic=float(payload.get("aic", 0.0)),
            loglik=float(payload.get("loglik", 0.0)),
        )


def bicop_hfunc(m: BicopModel, u, v):
    """h(u | v) = P(U <= u | V = v)."""
    u, v = clamp_unit(np.asarray(u, dtype=float)), clamp_unit(np.asarray(v, dtype=float))
    fam, p = m.family, m.params
    if m.rotation == 0:
        out = _base_h(fam, u, v, p)
    elif m.rotation == 90:
        out = 1.0 - _base_h(fam, 1.0 - u, v, p)
    elif m.rotation == 180:
        out = 1.0 - _base_h(fam, 1.0 - u, 1.0 - v, p)
    else:
        out = _base_h(fam, u, 1.0 - v, p)
    return clamp_unit(out)


def bicop_hinv(m: BicopModel, p, v):
    """Inverse of bicop_hfunc in its first argument."""
    p, v = clamp_unit(np.asarray(p, dtype=float)), clamp_unit(np.asarray(v, dtype=float))
    fam, params = m.family, m.params
    if m.rotation == 0:
        out = _base_hinv(fam, p, v, params)
    elif m.rotation == 90:
        out = 1.0 - _base_hinv(fam, 1.0 - p, v, params)
    elif m.rotation == 180:
        out = 1.0 - _base_hinv(fam, 1.0 - p, 1.0 - v, params)
    else:
        out = _base_hinv(fam, p, 1.0 - v, params)
    return clamp_unit(out)


def _swapped(m: BicopModel) -> BicopModel:
    rotation = {90: 270, 270: 90}.get(m.rotation, m.rotation)
    return BicopModel(m.family, rotation, m.params, m.aic, m.loglik)


def bicop_hfunc_swap(m: BicopModel, u, v):
    """h(v | u) = P(V <= v | U = u) for the same pair copula."""
    return bicop_hfunc(_swapped(m), v, u)


def bicop_hinv_swap(m: BicopModel, p, u):
    """Inverse of bicop_hfunc_swap in v."""
    return bicop_hinv(_swapped(m), p, u)


def bicop_logpdf(m: BicopModel, u, v):
    u, v = clamp_unit(np.asarray(u, dtype=float)), clamp_unit(np.asarray(v, dtype=float))
    logpdf = _BASE[m.family][2]
    if m.rotation == 90:
        u = 1.0 - u
    elif m.rotation == 180:
        u, v = 1.0 - u, 1.0 - v
    elif m.rotation == 270:
        v = 1.0 - v
    return logpdf(u, v, *m.params)


def bicop_pdf(m: BicopModel, u, v):
    return np.exp(bicop_logpdf(m, u, v))


def bicop_cdf(m: BicopModel, u, v):
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    cdf = _BASE[m.family][3]
    if m.rotation == 0:
        return cdf(u, v, *m.params)
    if m.rotation == 90:
        return v - cdf(1.0 - u, v, *m.params)
    if m.rotation == 180:
        return u + v - 1.0 + cdf(1.0 - u, 1.0 - v, *m.params)
    return u - cdf(u, 1.0 - v, *m.params)


def bicop_sample(m: BicopModel, n: int, seed) -> np.ndarray:
    rng = as_generator(seed, "bicop")
    w = rng.random((n, 2))
    v = clamp_unit(w[:, 1])
    return np.column_stack([bicop_hinv(m, w[:, 0], v), v])


def _frank_tau(theta):
    if abs(theta) < 1e-8:
        return 0.0
    debye, _ = integrate.quad(lambda t: t / np.expm1(t) if t != 0 else 1.0, 0.0, abs(theta))
    tau = 1.0 - 4.0 / abs(theta) * (1.0 - debye / abs(theta))
    return np.sign(theta) * tau


def _joe_tau(theta):
    k = np.arange(1, 5001, dtype=float)
    return 1.0 - 4.0 * np.sum(1.0 / (k * (theta * k + 2.0) * (theta * (k - 1.0) + 2.0)))


def tau_to_param(family, tau: float) -> float:
    """Parameter of the unrotated family with Kendall's tau |tau| (signed for Frank and elliptical)."""
    family = CopulaFamily(family)
    if family in (CopulaFamily.GAUSSIAN, CopulaFamily.STUDENT_T):
        return float(np.sin(np.pi * tau / 2.0))
    a = min(abs(tau), 0.99)
    if family == CopulaFamily.CLAYTON:
        return float(np.clip(2.0 * a / (1.0 - a), *BOUNDS[family]))
    if family == CopulaFamily.GUMBEL:
        return float(np.clip(1.0 / (1.0 - a), *BOUNDS[family]))
    if family == CopulaFamily.FRANK:
        if a < 1e-6:
            return 0.0
        lo, hi = 1e-6, BOUNDS[family][1]
        if _frank_tau(hi) <= a:
            return float(np.sign(tau) * hi)
        return float(np.sign(tau) * optimize.brentq(lambda t: _frank_tau(t) - a, lo, hi))
    if family == CopulaFamily.JOE:
        lo, hi = BOUNDS[family]
        if a <= 0.0:
            return lo
        if _joe_tau(hi) <= a:
            return hi
        return float(optimize.brentq(lambda t: _joe_tau(t) - a, lo + 1e-9, hi))
    return 0.0


# =====================================================
# FITTING
# =====================================================


def _candidates(families, tau):
    for family in sorted(families, key=FAMILY_ORDER.index):
        if family == CopulaFamily.INDEPENDENCE:
            continue
        if family in ARCHIMEDEAN_ROTATED:
            rotations = (0, 180) if tau >= 0 else (90, 270)
        else:
            rotations = (0,)
        for rotation in rotations:
            yield family, rotation


def _loglik(family, rotation, params, u, v) -> float:
    with np.errstate(all="ignore"):
        value = float(np.sum(bicop_logpdf(BicopModel(family, rotation, tuple(params)), u, v)))
    return value if np.isfinite(value) else -np.inf


def _negloglik(family, rotation, params, u, v) -> float:
    value = _loglik(family, rotation, params, u, v)
    return -value if np.isfinite(value) else 1e300


def _fit_candidate(family, rotation, u, v, tau):
    if family == CopulaFamily.STUDENT_T:
        x0 = [np.clip(np.sin(np.pi * tau / 2.0), -0.9, 0.9), 8.0]
        result = optimize.minimize(
            lambda x: _negloglik(family, rotation, x, u, v),
            x0,
            method="L-BFGS-B",
            bounds=T_BOUNDS,
        )
        params = tuple(float(p) for p in result.x)
        if params[1] >= T_NU_CAP - 1e-3:
            logger.debug("t pair copula hit the nu cap, collapsing to Gaussian")
            return _fit_candidate(CopulaFamily.GAUSSIAN, 0, u, v, tau)
        return family, rotation, params, -float(result.fun)

    lo, hi = BOUNDS[family]
    if family == CopulaFamily.FRANK:
        lo, hi = (1e-6, hi) if tau >= 0 else (lo, -1e-6)
    result = optimize.minimize_scalar(
        lambda th: _negloglik(family, rotation, (th,), u, v),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-7},
    )
    return family, rotation, (float(result.x),), -float(result.fun)


def fit_bicop(u, families) -> BicopModel:
    """Per family/rotation MLE, lowest AIC wins; Independence always competes."""
    u = np.asarray(u, dtype=float)
    if u.shape[0] < MIN_PAIR_OBS:
        raise FitError(f"pair copula needs at least {MIN_PAIR_OBS} rows, got {u.shape[0]}", stage="bicop")
    u1, u2 = clamp_unit(u[:, 0]), clamp_unit(u[:, 1])
    tau = kendall_tau(u1, u2)

    best = BicopModel()
    attempted = failed = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for family, rotation in _candidates(families, tau):
            attempted += 1
            try:
                fam, rot, params, loglik = _fit_candidate(family, rotation, u1, u2, tau)
            except (ValueError, FloatingPointError, np.linalg.LinAlgError):
                failed += 1
                continue
            if not np.isfinite(loglik):
                failed += 1
                continue
            aic = 2.0 * N_PARAMS[fam] - 2.0 * loglik
            key = (aic, N_PARAMS[fam], FAMILY_ORDER.index(fam), rot)
            best_key = (best.aic, N_PARAMS[best.family], FAMILY_ORDER.index(best.family), best.rotation)
            if key < best_key:
                best = BicopModel(fam, rot, params, aic, loglik)

    if attempted and failed == attempted:
        logger.warning("all pair-copula fits failed, using Independence")
        return BicopModel(flags=("all_failed",))
    return best


# =====================================================
# ELLIPTICAL COPULAS
# =====================================================


@dataclass(frozen=True)
class EllipticalCopula:
    kind: CopulaFamily
    R: np.ndarray
    nu: float = None
    flags: tuple = field(default=(), compare=False)

    @property
    def d(self) -> int:
        return self.R.shape[0]

    def to_dict(self) -> dict:
        return {"kind": CopulaFamily(self.kind).value, "R": self.R.tolist(), "nu": self.nu}

    @classmethod
    def from_dict(cls, payload: dict) -> "EllipticalCopula":
        return cls(CopulaFamily(payload["kind"]), np.asarray(payload["R"]), payload.get("nu"))


def nearest_correlation(R, floor=PD_FLOOR):
    """Clip eigenvalues at `floor` and rescale to unit diagonal; returns (R, projected)."""
    R = 0.5 * (R + R.T)
    values, vectors = np.linalg.eigh(R)
    if values.min() >= floor:
        return R, False
    fixed = (vectors * np.maximum(values, floor)) @ vectors.T
    d = np.sqrt(np.diag(fixed))
    fixed = fixed / np.outer(d, d)
    np.fill_diagonal(fixed, 1.0)
    return fixed, True


def elliptical_loglik(u, kind, R, nu=None) -> float:
    u = clamp_unit(np.asarray(u, dtype=float))
    if CopulaFamily(kind) == CopulaFamily.STUDENT_T:
        x = stats.t.ppf(u, nu)
        joint = stats.multivariate_t(shape=R, df=nu).logpdf(x)
        return float(np.sum(joint) - np.sum(stats.t.logpdf(x, nu)))
    x = special.ndtri(u)
    joint = stats.multivariate_normal(cov=R).logpdf(x)
    return float(np.sum(joint) - np.sum(stats.norm.logpdf(x)))


def fit_elliptical_copula(u, kind) -> EllipticalCopula:
    kind = CopulaFamily(kind)
    if kind not in (CopulaFamily.GAUSSIAN, CopulaFamily.STUDENT_T):
        raise ValueError(f"{kind} is not an elliptical family")
    u = np.asarray(u, dtype=float)
    n, D = u.shape
    if n < D + 10:
        raise FitError(f"elliptical copula needs at least {D + 10} rows, got {n}", stage="copula")
    if D == 1:
        return EllipticalCopula(kind, np.ones((1, 1)), 30.0 if kind == CopulaFamily.STUDENT_T else None)

    R = np.sin(np.pi * kendall_matrix(u) / 2.0)
    R, projected = nearest_correlation(R)
    flags = ("projected",) if projected else ()
    if projected:
        logger.warning("tau-implied correlation matrix was not positive definite, projected")

    nu = None
    if kind == CopulaFamily.STUDENT_T:
        profile = optimize.minimize_scalar(
            lambda v: -elliptical_loglik(u, kind, R, v),
            bounds=(2.001, 200.0),
            method="bounded",
        )
        nu = float(profile.x)
    return EllipticalCopula(kind, R, nu, flags)


def sample_elliptical_copula(c: EllipticalCopula, n: int, seed) -> np.ndarray:
    rng = as_generator(seed, "elliptical")
    L = np.linalg.cholesky(c.R)
    z = rng.standard_normal((n, c.d)) @ L.T
    if CopulaFamily(c.kind) == CopulaFamily.STUDENT_T:
        w = rng.chisquare(c.nu, n)
        z = z / np.sqrt(w / c.nu)[:, None]
        return clamp_unit(stats.t.cdf(z, c.nu))
    return clamp_unit(special.ndtr(z))

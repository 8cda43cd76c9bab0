"""
GARCH(1,1) and DCC(1,1)-GARCH(1,1).

    a_t = r_t - mu,  a_t = sqrt(h_t) z_t
    h_t = alpha0 + alpha1 a_{t-1}^2 + beta1 h_{t-1}
    Q_t = (1 - a - b) Qbar + a e_{t-1}' e_{t-1} + b Q_{t-1}
    R_t = diag(Q_t)^{-1/2} Q_t diag(Q_t)^{-1/2}

Both recursions are first-order linear filters and run through
scipy.signal.lfilter along the time axis.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, signal, special

from .choices import InnovationDist
from .containers import ScenarioMatrix
from .exceptions import FitError
from .helpers import as_generator

logger = logging.getLogger(__name__)

MIN_GARCH_OBS = 50
NU_FLOOR = 2.1
PERSISTENCE_CAP = 1.0 - 1e-7
BOUNDARY = 1.0 - 1e-6
JITTER = 1e-8


# =====================================================
# UNIVARIATE GARCH(1,1)
# =====================================================


@dataclass(frozen=True)
class GarchModel:
    mu: float
    alpha0: float
    alpha1: float
    beta1: float
    dist: InnovationDist = InnovationDist.GAUSSIAN
    nu: float = None
    last_h: float = 1.0
    last_a: float = 0.0
    h0: float = 1.0
    loglik: float = float("nan")
    flags: tuple = field(default=(), compare=False)

    @property
    def persistence(self) -> float:
        return self.alpha1 + self.beta1

    @property
    def unconditional_variance(self) -> float:
        return self.alpha0 / (1.0 - self.persistence)

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "alpha0": self.alpha0,
            "alpha1": self.alpha1,
            "beta1": self.beta1,
            "dist": InnovationDist(self.dist).value,
            "nu": self.nu,
            "last_h": self.last_h,
            "last_a": self.last_a,
            "h0": self.h0,
            "loglik": self.loglik,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "GarchModel":
        payload = dict(payload)
        payload["dist"] = InnovationDist(payload["dist"])
        return cls(**payload)


def garch_variance_path(a, alpha0, alpha1, beta1, h0):
    """h_1 = h0 and the GARCH recursion for t >= 2."""
    a = np.asarray(a, dtype=float)
    if a.size <= 1:
        return np.full(a.size, h0)
    drive = alpha0 + alpha1 * a[:-1] ** 2
    tail, _ = signal.lfilter([1.0], [1.0, -beta1], drive, zi=[beta1 * h0])
    return np.concatenate(([h0], tail))


def std_t_logpdf(z, nu):
    """Log density of the unit-variance Student t."""
    return (
        special.gammaln((nu + 1.0) / 2.0)
        - special.gammaln(nu / 2.0)
        - 0.5 * np.log(np.pi * (nu - 2.0))
        - (nu + 1.0) / 2.0 * np.log1p(z**2 / (nu - 2.0))
    )


def _unpack_garch(theta, student):
    alpha0 = np.exp(theta[0])
    persistence = special.expit(theta[1]) * PERSISTENCE_CAP
    share = special.expit(theta[2])
    nu = NU_FLOOR + np.exp(theta[3]) if student else None
    return alpha0, persistence * share, persistence * (1.0 - share), nu


def _garch_loglik(a, h, dist, nu):
    if dist == InnovationDist.STUDENT_T:
        return float(np.sum(std_t_logpdf(a / np.sqrt(h), nu) - 0.5 * np.log(h)))
    return float(-0.5 * np.sum(np.log(2.0 * np.pi) + np.log(h) + a**2 / h))


def fit_garch11(returns, dist=InnovationDist.GAUSSIAN) -> GarchModel:
    dist = InnovationDist(dist)
    r = np.asarray(returns, dtype=float).ravel()
    if r.size < MIN_GARCH_OBS:
        raise FitError(f"GARCH needs at least {MIN_GARCH_OBS} observations, got {r.size}", stage="garch")
    mu = float(r.mean())
    a = r - mu
    h0 = float(a.var())
    if h0 <= 0.0:
        raise FitError("constant return series", stage="garch", flags=("degenerate",))
    student = dist == InnovationDist.STUDENT_T

    def objective(theta):
        alpha0, alpha1, beta1, nu = _unpack_garch(theta, student)
        h = garch_variance_path(a, alpha0, alpha1, beta1, h0)
        if not np.all(h > 0.0):
            return 1e300
        value = -_garch_loglik(a, h, dist, nu)
        return value if np.isfinite(value) else 1e300

    x0 = [np.log(0.05 * h0), special.logit(0.95), special.logit(0.1 / 0.95)]
    if student:
        x0.append(np.log(8.0 - NU_FLOOR))

    result = optimize.minimize(objective, x0, method="L-BFGS-B")
    if not result.success:
        retry = optimize.minimize(
            objective, result.x, method="Nelder-Mead",
            options={"maxiter": 4000, "xatol": 1e-8, "fatol": 1e-10},
        )
        if retry.fun <= result.fun:
            result = retry

    alpha0, alpha1, beta1, nu = _unpack_garch(result.x, student)
    flags = []
    if alpha1 + beta1 >= BOUNDARY:
        flags.append("boundary")
        logger.warning("GARCH fit on boundary: alpha1 + beta1 = %.8f", alpha1 + beta1)
    if not result.success and (not np.isfinite(result.fun) or result.fun >= 1e300):
        raise FitError(
            "GARCH likelihood optimization did not converge",
            stage="garch",
            params=(alpha0, alpha1, beta1, nu),
            flags=("nonconvergence",),
        )
    if not result.success:
        flags.append("slow_convergence")

    h = garch_variance_path(a, alpha0, alpha1, beta1, h0)
    return GarchModel(
        mu=mu,
        alpha0=float(alpha0),
        alpha1=float(alpha1),
        beta1=float(beta1),
        dist=dist,
        nu=None if nu is None else float(nu),
        last_h=float(h[-1]),
        last_a=float(a[-1]),
        h0=h0,
        loglik=-float(result.fun),
        flags=tuple(flags),
    )


def garch_filter(model: GarchModel, returns, h0=None):
    """Standardized residuals and variance path of `returns` under `model`."""
    a = np.asarray(returns, dtype=float).ravel() - model.mu
    h = garch_variance_path(a, model.alpha0, model.alpha1, model.beta1, model.h0 if h0 is None else h0)
    return a / np.sqrt(h), h


def garch_forecast_variance(model: GarchModel) -> float:
    return model.alpha0 + model.alpha1 * model.last_a**2 + model.beta1 * model.last_h


def draw_innovations(rng, shape, dist, nu=None):
    """Unit-variance Gaussian or Student t draws; t rows share one mixing scale."""
    z = rng.standard_normal(shape)
    if InnovationDist(dist) == InnovationDist.STUDENT_T:
        n = shape[0] if isinstance(shape, tuple) else shape
        w = rng.chisquare(nu, n)
        scale = np.sqrt((nu - 2.0) / w)
        z = z * (scale[:, None] if z.ndim == 2 else scale)
    return z


def simulate_garch11(model: GarchModel, n: int, seed, h0=None, z=None):
    """Simulate a GARCH path of length n; returns (returns, z, h)."""
    rng = as_generator(seed, "garch-path")
    if z is None:
        z = draw_innovations(rng, n, model.dist, model.nu)
    z = np.asarray(z, dtype=float)
    h = np.empty(n)
    a = np.empty(n)
    h[0] = model.unconditional_variance if h0 is None else h0
    a[0] = np.sqrt(h[0]) * z[0]
    for t in range(1, n):
        h[t] = model.alpha0 + model.alpha1 * a[t - 1] ** 2 + model.beta1 * h[t - 1]
        a[t] = np.sqrt(h[t]) * z[t]
    return model.mu + a, z, h


# =====================================================
# DCC(1,1)
# =====================================================


@dataclass(frozen=True)
class DccModel:
    a: float
    b: float
    Qbar: np.ndarray
    last_Q: np.ndarray
    last_eps: np.ndarray
    garch: tuple = ()
    dist: InnovationDist = InnovationDist.GAUSSIAN
    nu: float = None
    loglik: float = float("nan")
    flags: tuple = field(default=(), compare=False)

    @property
    def d(self) -> int:
        return self.Qbar.shape[0]

    def next_Q(self) -> np.ndarray:
        e = self.last_eps
        return (1.0 - self.a - self.b) * self.Qbar + self.a * np.outer(e, e) + self.b * self.last_Q

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "Qbar": self.Qbar.tolist(),
            "last_Q": self.last_Q.tolist(),
            "last_eps": self.last_eps.tolist(),
            "garch": [g.to_dict() for g in self.garch],
            "dist": InnovationDist(self.dist).value,
            "nu": self.nu,
            "loglik": self.loglik,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "DccModel":
        return cls(
            a=payload["a"],
            b=payload["b"],
            Qbar=np.asarray(payload["Qbar"]),
            last_Q=np.asarray(payload["last_Q"]),
            last_eps=np.asarray(payload["last_eps"]),
            garch=tuple(GarchModel.from_dict(g) for g in payload.get("garch", [])),
            dist=InnovationDist(payload["dist"]),
            nu=payload.get("nu"),
            loglik=payload.get("loglik", float("nan")),
        )


def to_correlation(Q):
    """Rescale covariance-like matrices (..., D, D) to unit diagonal."""
    d = np.sqrt(np.einsum("...ii->...i", Q))
    R = Q / (d[..., :, None] * d[..., None, :])
    idx = np.arange(Q.shape[-1])
    R[..., idx, idx] = 1.0
    return R


def dcc_q_path(eps, a, b, Qbar):
    """Q_1 = Qbar and the DCC recursion for t >= 2, shape (T, D, D)."""
    T, D = eps.shape
    outer = np.einsum("ti,tj->tij", eps[:-1], eps[:-1]).reshape(T - 1, D * D)
    drive = (1.0 - a - b) * Qbar.reshape(1, D * D) + a * outer
    if T == 1:
        return Qbar[None].copy()
    tail, _ = signal.lfilter([1.0], [1.0, -b], drive, axis=0, zi=b * Qbar.reshape(1, D * D))
    return np.concatenate((Qbar[None], tail.reshape(T - 1, D, D)))


def _quad_forms(R, eps):
    sign, logdet = np.linalg.slogdet(R)
    solved = np.linalg.solve(R, eps[..., None])[..., 0]
    return sign, logdet, np.einsum("ti,ti->t", eps, solved)


def _dcc_gauss_loglik(eps, R):
    sign, logdet, quad = _quad_forms(R, eps)
    if np.any(sign <= 0):
        return -np.inf
    return float(-0.5 * np.sum(logdet + quad - np.einsum("ti,ti->t", eps, eps)))


def _dcc_t_loglik(eps, R, nu):
    D = eps.shape[1]
    sign, logdet, quad = _quad_forms(R, eps)
    if np.any(sign <= 0):
        return -np.inf
    per_step = (
        special.gammaln((nu + D) / 2.0)
        - special.gammaln(nu / 2.0)
        - 0.5 * D * np.log(np.pi * (nu - 2.0))
        - 0.5 * logdet
        - 0.5 * (nu + D) * np.log1p(quad / (nu - 2.0))
    )
    return float(np.sum(per_step))


def _is_pd(matrix) -> bool:
    try:
        np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        return False
    return True


def _scalar_nu(dist, garch):
    if dist != InnovationDist.STUDENT_T:
        return None
    if garch and garch[0].nu is not None:
        return garch[0].nu
    return 30.0


def fit_dcc11(std_residuals, dist=InnovationDist.GAUSSIAN, garch=()) -> DccModel:
    """Second-step correlation QMLE on GARCH-standardized residuals."""
    dist = InnovationDist(dist)
    eps = np.asarray(std_residuals, dtype=float)
    if eps.ndim == 1:
        eps = eps[:, None]
    T, D = eps.shape
    flags = []

    Qbar = eps.T @ eps / T
    if not _is_pd(Qbar):
        Qbar = Qbar + JITTER * np.eye(D)
        flags.append("qbar_jitter")
        logger.warning("DCC: unconditional matrix not positive definite, added %.0e jitter", JITTER)

    if D == 1:
        return DccModel(
            a=0.0, b=0.0, Qbar=Qbar, last_Q=Qbar.copy(), last_eps=eps[-1].copy(),
            garch=tuple(garch), dist=dist, nu=_scalar_nu(dist, garch),
            loglik=0.0, flags=tuple(flags + ["scalar"]),
        )

    def negloglik(params):
        a, b = params
        if a < 0.0 or b < 0.0 or a + b >= 1.0:
            return 1e300
        R = to_correlation(dcc_q_path(eps, a, b, Qbar))
        value = -_dcc_gauss_loglik(eps, R)
        return value if np.isfinite(value) else 1e300

    result = optimize.minimize(
        negloglik,
        x0=[0.02, 0.95],
        method="SLSQP",
        bounds=[(0.0, 1.0), (0.0, 1.0)],
        constraints=[{"type": "ineq", "fun": lambda p: BOUNDARY - p[0] - p[1]}],
        options={"ftol": 1e-10, "maxiter": 500},
    )
    a, b = (float(v) for v in np.clip(result.x, 0.0, 1.0))
    if a + b >= BOUNDARY:
        scale = (BOUNDARY - 1e-9) / (a + b)
        a, b = a * scale, b * scale
        flags.append("boundary")
    if not result.success:
        flags.append("slow_convergence")
        logger.warning("DCC optimizer: %s", result.message)
        if not np.isfinite(result.fun) or result.fun >= 1e300:
            raise FitError(
                "DCC likelihood optimization did not converge",
                stage="dcc", params=(a, b), flags=tuple(flags + ["nonconvergence"]),
            )

    Q = dcc_q_path(eps, a, b, Qbar)
    R = to_correlation(Q)
    nu = None
    loglik = _dcc_gauss_loglik(eps, R)
    if dist == InnovationDist.STUDENT_T:
        profile = optimize.minimize_scalar(
            lambda v: -_dcc_t_loglik(eps, R, v), bounds=(NU_FLOOR, 200.0), method="bounded"
        )
        nu = float(profile.x)
        loglik = -float(profile.fun)

    return DccModel(
        a=a, b=b, Qbar=Qbar, last_Q=Q[-1], last_eps=eps[-1].copy(), garch=tuple(garch),
        dist=dist, nu=nu, loglik=loglik, flags=tuple(flags),
    )


def fit_dcc_garch(returns, dist=InnovationDist.GAUSSIAN) -> DccModel:
    returns = np.asarray(returns, dtype=float)
    garch = []
    eps = np.empty_like(returns)
    for d in range(returns.shape[1]):
        try:
            model = fit_garch11(returns[:, d], dist)
        except FitError as exc:
            raise exc.at(f"asset {d}")
        garch.append(model)
        eps[:, d], _ = garch_filter(model, returns[:, d])
    return fit_dcc11(eps, dist, garch)


def dcc_correlations(model: DccModel, eps) -> np.ndarray:
    eps = np.asarray(eps, dtype=float)
    if model.d == 1:
        return np.ones((eps.shape[0], 1, 1))
    return to_correlation(dcc_q_path(eps, model.a, model.b, model.Qbar))


def _cholesky_with_jitter(matrix):
    try:
        return np.linalg.cholesky(matrix), ()
    except np.linalg.LinAlgError:
        logger.warning("Cholesky failed on one-step covariance, retrying with jitter")
    try:
        return np.linalg.cholesky(matrix + JITTER * np.eye(matrix.shape[0])), ("cholesky_jitter",)
    except np.linalg.LinAlgError as exc:
        raise FitError("one-step covariance is not positive definite", stage="dcc") from exc


def simulate_dcc(model: DccModel, n: int, seed, model_id="dcc11", asof="") -> ScenarioMatrix:
    """One-step-ahead draws r = mu + e L' with L L' = H_{T+1}."""
    rng = as_generator(seed, "dcc")
    D = model.d
    h_next = np.array([garch_forecast_variance(g) for g in model.garch])
    mu = np.array([g.mu for g in model.garch])
    R = to_correlation(model.next_Q()[None])[0] if D > 1 else np.ones((1, 1))
    sd = np.sqrt(h_next)
    H = R * np.outer(sd, sd)
    L, flags = _cholesky_with_jitter(H)
    e = draw_innovations(rng, (n, D), model.dist, model.nu)
    values = mu + e @ L.T
    return ScenarioMatrix(values, model_id=model_id, asof=asof, seed=seed if isinstance(seed, int) else 0, flags=flags)

"""
Value and policy models for blending arm portfolios.

The value model scores each arm by the similarity between the weights it
decided and the returns that followed, then grades arms against each other
with an activation (optimality pi, a row on the simplex). The policy model
fits a decayed maximum-likelihood distribution over a window of pi rows and
turns its parameters into blending ratios psi.

History rows are ordered oldest to newest; the newest row gets weight
gamma**0, the one before gamma**1, and so on.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .choices import ActivationKind, Policy, SimilarityKind
from .helpers import safe_cosine

logger = logging.getLogger(__name__)

GAIN = 7.0
SIMPLEX_EPS = 1e-6
LOGIT_EPS = 1e-9
NU_CAP = 1e6
DIRICHLET_MAX_ITER = 2000
DIRICHLET_TOL = 1e-12
STATIONARITY_TOL = 1e-6
LEAKY_RELU_VARIANTS = ("verbatim", "conventional")


@dataclass(frozen=True)
class BanditConfig:
    similarity: SimilarityKind
    activation: ActivationKind
    gamma: float
    policy: Policy
    window: int = 26
    leaky_relu: str = "verbatim"

    def __post_init__(self):
        object.__setattr__(self, "similarity", SimilarityKind(self.similarity))
        object.__setattr__(self, "activation", ActivationKind(self.activation))
        object.__setattr__(self, "policy", Policy(self.policy))
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"decay must lie in (0, 1), got {self.gamma}")
        if self.window < 2:
            raise ValueError(f"blend window must be at least 2, got {self.window}")
        if self.leaky_relu not in LEAKY_RELU_VARIANTS:
            raise ValueError(f"unknown leaky relu variant {self.leaky_relu!r}")

    @property
    def labels(self) -> dict:
        """Attribution labels of this configuration, one per factor."""
        return {
            "SimiMtd": f"SimiMtd {self.similarity.value}",
            "ActFun": f"ActFun {self.activation.value}",
            "Decay": f"Decay {self.gamma:g}",
            "BldMtd": f"BldMtd {self.policy.value}",
        }

    @property
    def label(self) -> str:
        return " | ".join(self.labels.values())


@dataclass(frozen=True)
class OptimalityHistory:
    pi: np.ndarray
    timestamps: tuple = field(default=(), compare=False)

    def __post_init__(self):
        pi = np.atleast_2d(np.asarray(self.pi, dtype=float))
        if pi.size == 0:
            raise ValueError("optimality history is empty")
        if np.any(pi < -1e-12) or np.any(pi > 1 + 1e-12):
            raise ValueError("optimality entries must lie in [0, 1]")
        if np.any(np.abs(pi.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("optimality rows must sum to 1")
        object.__setattr__(self, "pi", pi)

    def tail(self, window: int) -> "OptimalityHistory":
        return OptimalityHistory(self.pi[-window:], tuple(self.timestamps[-window:]))


def _rows(history) -> np.ndarray:
    return np.atleast_2d(np.asarray(getattr(history, "pi", history), dtype=float))


def decay_weights(n: int, gamma: float) -> np.ndarray:
    return gamma ** np.arange(n - 1, -1, -1, dtype=float)


# =====================================================
# VALUE MODEL
# =====================================================


def similarity(kind, w0, r) -> float:
    kind = SimilarityKind(kind)
    w0 = np.asarray(w0, dtype=float)
    r = np.asarray(r, dtype=float)
    if kind == SimilarityKind.ZSCORE:
        return float(2.0 * special.ndtr(w0 @ r) - 1.0)
    if not np.any(r):
        logger.debug("zero return vector, similarity set to 0")
        return 0.0
    if kind == SimilarityKind.COSINE:
        return safe_cosine(w0, r)
    w_norm = np.abs(w0).sum()
    if w_norm == 0.0:
        return 0.0
    d = w0 / w_norm - r / np.abs(r).sum()
    order = {SimilarityKind.L1: 1, SimilarityKind.L2: 2, SimilarityKind.LINF: np.inf}[kind]
    return float(1.0 - np.linalg.norm(d, ord=order))


def _grades(kind, s, leaky_relu) -> np.ndarray:
    if kind == ActivationKind.MAXOUT:
        return (s == s.max()).astype(float)
    if kind == ActivationKind.SOFTMAX:
        return np.exp(GAIN * s)
    if kind == ActivationKind.LOGISTIC:
        return special.expit(GAIN * s)
    if kind == ActivationKind.TANH:
        return 1.0 + np.tanh(GAIN * s)
    if kind == ActivationKind.LEAKY_RELU:
        if leaky_relu == "conventional":
            return 1.0 / GAIN + np.where(s >= 0, GAIN * s, s / GAIN)
        return 1.0 / GAIN + GAIN * np.abs(s)
    p = np.clip((1.0 + s) / 2.0, LOGIT_EPS, 1.0 - LOGIT_EPS)
    if kind == ActivationKind.LOGIT:
        return np.maximum(0.0, special.logit(p))
    if kind == ActivationKind.PROBIT:
        return np.maximum(0.0, special.ndtri(p))
    raise ValueError(f"unknown activation {kind!r}")


def optimality(kind, s, leaky_relu="verbatim") -> np.ndarray:
    """Grades of the arms' similarities rescaled onto the simplex."""
    s = np.asarray(s, dtype=float)
    g = _grades(ActivationKind(kind), s, leaky_relu)
    total = g.sum()
    if not total > 0 or not np.isfinite(total):
        logger.debug("all %s grades are zero, using uniform optimality", kind)
        return np.full(s.size, 1.0 / s.size)
    return g / total


def value_model(sim_kind, act_kind, arms_w0, r, leaky_relu="verbatim") -> np.ndarray:
    s = np.array([similarity(sim_kind, w0, r) for w0 in arms_w0])
    return optimality(act_kind, s, leaky_relu)


# =====================================================
# POLICY MODEL
# =====================================================


def wmle_categorical(history, gamma) -> np.ndarray:
    pi = _rows(history)
    weighted = decay_weights(pi.shape[0], gamma) @ pi
    return weighted / weighted.sum()


def wmle_bernoulli(series, gamma) -> float:
    x = np.asarray(series, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("series is empty")
    weights = decay_weights(x.size, gamma)
    return float(weights @ x / weights.sum())


def _inv_digamma(y, iterations=8):
    x = np.where(y >= -2.22, np.exp(y) + 0.5, -1.0 / (y - special.digamma(1.0)))
    for _ in range(iterations):
        x = x - (special.digamma(x) - y) / special.polygamma(1, x)
    return x


def _dirichlet_moments(pi, weights):
    mean = weights @ pi / weights.sum()
    second = weights @ pi**2 / weights.sum()
    var = second[0] - mean[0] ** 2
    if var <= 0:
        return mean * NU_CAP
    precision = min((mean[0] - second[0]) / var, NU_CAP)
    return mean * max(precision, SIMPLEX_EPS)


def dirichlet_gradient(alpha, pi, weights) -> np.ndarray:
    """Gradient of the decayed Dirichlet log-likelihood per unit weight."""
    log_bar = weights @ np.log(pi) / weights.sum()
    return special.digamma(alpha.sum()) - special.digamma(alpha) + log_bar


def _prepare_simplex(history):
    pi = np.clip(_rows(history), SIMPLEX_EPS, 1.0 - SIMPLEX_EPS)
    return pi / pi.sum(axis=1, keepdims=True)


def wmle_dirichlet(history, gamma) -> np.ndarray:
    """Concentrations of the decayed-likelihood Dirichlet fit (fixed-point iteration)."""
    pi = _prepare_simplex(history)
    weights = decay_weights(pi.shape[0], gamma)
    log_bar = weights @ np.log(pi) / weights.sum()
    alpha = _dirichlet_moments(pi, weights)
    for _ in range(DIRICHLET_MAX_ITER):
        updated = _inv_digamma(special.digamma(alpha.sum()) + log_bar)
        if not np.all(np.isfinite(updated)) or updated.sum() > NU_CAP:
            break
        step = np.max(np.abs(updated - alpha))
        alpha = updated
        if step < DIRICHLET_TOL * max(1.0, alpha.max()):
            break
    if (
        np.all(np.isfinite(alpha))
        and np.all(alpha > 0)
        and np.max(np.abs(dirichlet_gradient(alpha, pi, weights))) < STATIONARITY_TOL
    ):
        return alpha
    logger.warning("Dirichlet fit did not converge, using moment estimates")
    return _dirichlet_moments(pi, weights)


def beta_negloglik(params, log_x, log_1mx, weights) -> float:
    """Decayed Beta(theta nu, nu - theta nu) negative log-likelihood per unit weight."""
    theta, nu = params
    a, b = theta * nu, (1.0 - theta) * nu
    total = weights.sum()
    loglik = (
        (a - 1.0) * (weights @ log_x) + (b - 1.0) * (weights @ log_1mx)
    ) / total - special.betaln(a, b)
    return -float(loglik)


def wmle_beta(series, gamma) -> tuple:
    """Mean and precision (theta, nu) of the decayed-likelihood Beta fit."""
    x = np.clip(np.asarray(series, dtype=float).ravel(), SIMPLEX_EPS, 1.0 - SIMPLEX_EPS)
    if x.size == 0:
        raise ValueError("series is empty")
    weights = decay_weights(x.size, gamma)
    total = weights.sum()
    log_x, log_1mx = np.log(x), np.log1p(-x)
    mean = float(weights @ x / total)
    var = float(weights @ (x - mean) ** 2 / total)
    if var <= 0:
        return mean, NU_CAP
    nu0 = float(np.clip(mean * (1 - mean) / var - 1.0, 1e-3, NU_CAP))

    def objective(z):
        theta, nu = special.expit(z[0]), np.exp(z[1])
        a, b = theta * nu, (1.0 - theta) * nu
        ga = (weights @ log_x) / total - special.digamma(a) + special.digamma(nu)
        gb = (weights @ log_1mx) / total - special.digamma(b) + special.digamma(nu)
        value = beta_negloglik((theta, nu), log_x, log_1mx, weights)
        # chain rule through a = theta nu, b = (1 - theta) nu
        d_theta = nu * (ga - gb) * theta * (1.0 - theta)
        d_lognu = (theta * ga + (1.0 - theta) * gb) * nu
        return value, -np.array([d_theta, d_lognu])

    start = np.array([special.logit(np.clip(mean, SIMPLEX_EPS, 1 - SIMPLEX_EPS)), np.log(nu0)])
    result = optimize.minimize(
        objective,
        start,
        jac=True,
        method="L-BFGS-B",
        bounds=[(None, None), (np.log(1e-3), np.log(NU_CAP))],
        options={"gtol": 1e-12, "ftol": 1e-15, "maxiter": 1000},
    )
    if not np.all(np.isfinite(result.x)) or not np.isfinite(result.fun):
        logger.warning("Beta fit did not converge, using moment estimates")
        return mean, nu0
    return float(special.expit(result.x[0])), float(np.exp(result.x[1]))


def policy_ratio(theta, policy) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if Policy(policy) == Policy.SWITCH:
        psi = np.zeros_like(theta)
        psi[int(np.argmax(theta))] = 1.0
        return psi
    return theta / theta.sum()


def policy_model(history, gamma, policy, activation) -> tuple:
    """Fitted parameters and blending ratios (theta, psi) for a window of optimality rows.

    Maxout optimality is fitted with a categorical (blend) or per-arm
    Bernoulli (switch) model, graded activations with a Dirichlet or per-arm
    Beta model.
    """
    pi = _rows(history)
    greedy = ActivationKind(activation) == ActivationKind.MAXOUT
    if Policy(policy) == Policy.BLEND:
        theta = wmle_categorical(pi, gamma) if greedy else wmle_dirichlet(pi, gamma)
    elif greedy:
        theta = np.array([wmle_bernoulli(pi[:, p], gamma) for p in range(pi.shape[1])])
    else:
        theta = np.array([wmle_beta(pi[:, p], gamma)[0] for p in range(pi.shape[1])])
    return theta, policy_ratio(theta, policy)


def eclectic_weights(psi, arms) -> np.ndarray:
    """Blend of arm weights; the unallocated remainder stays in cash."""
    return np.asarray(psi, dtype=float) @ np.asarray(arms, dtype=float)

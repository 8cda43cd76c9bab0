import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize, stats

from .choices import CopulaFamily, CopulaPreset, Dependence, InnovationDist, MarginalFamily, MarginalMode
from .containers import ScenarioMatrix
from .copula import (
    fit_elliptical_copula,
    preset_families,
    sample_elliptical_copula,
)
from .exceptions import FitError
from .helpers import as_generator, clamp_unit
from .marginals import fit_marginal, fit_marginals, pseudo_observations
from .vine import RvineModel, fit_rvine, sample_rvine
from .volatility import (
    DccModel,
    fit_dcc_garch,
    fit_garch11,
    garch_filter,
    garch_forecast_variance,
    simulate_dcc,
)

logger = logging.getLogger(__name__)

RETURN_FLOOR = -1.0 + 1e-9
MIN_SCENARIOS = 100
DEFAULT_MARGINAL_FAMILIES = tuple(f for f in MarginalFamily if f != MarginalFamily.EMPIRICAL)


# =====================================================
# MODEL SPECS
# =====================================================


@dataclass(frozen=True)
class GenModelSpec:
    id: str
    dependence: Dependence
    marginal_mode: MarginalMode = MarginalMode.NOT_APPLICABLE
    garch_prefilter: bool = False
    preset: CopulaPreset = None
    dist: InnovationDist = InnovationDist.GAUSSIAN

    def __post_init__(self):
        if self.dependence in (Dependence.MV_GAUSSIAN, Dependence.MV_STUDENT_T, Dependence.DCC):
            if self.marginal_mode != MarginalMode.NOT_APPLICABLE:
                raise ValueError(f"{self.id}: {self.dependence.label} takes no marginal mode")
        elif self.marginal_mode == MarginalMode.NOT_APPLICABLE:
            raise ValueError(f"{self.id}: copula models need a marginal mode")
        if self.dependence == Dependence.RVINE and self.preset is None:
            raise ValueError(f"{self.id}: vine models need a family preset")


def _build_registry() -> dict:
    specs = [
        GenModelSpec("mvnorm", Dependence.MV_GAUSSIAN),
        GenModelSpec("mvt", Dependence.MV_STUDENT_T),
    ]
    for mode in (MarginalMode.PARAMETRIC, MarginalMode.EMPIRICAL):
        for kind, dependence in (("norm", Dependence.GAUSS_COPULA), ("t", Dependence.T_COPULA)):
            for garch in (False, True):
                label = f"{mode.value} mvcop {kind}" + (" garch11" if garch else "")
                specs.append(GenModelSpec(label, dependence, mode, garch))
        for garch in (False, True):
            for preset in CopulaPreset:
                label = f"{mode.value} vinecop" + (" garch11" if garch else "") + f" {preset.value}"
                specs.append(GenModelSpec(label, Dependence.RVINE, mode, garch, preset))
    for dist in InnovationDist:
        specs.append(GenModelSpec(f"dcc11 {dist.value} garch11", Dependence.DCC, dist=dist))
    return {spec.id: spec for spec in specs}


REGISTRY = _build_registry()


def get_model_spec(label: str) -> GenModelSpec:
    try:
        return REGISTRY[label]
    except KeyError:
        raise ValueError(f"unknown generative model {label!r}") from None


# =====================================================
# FITTED MODELS
# =====================================================


@dataclass(frozen=True)
class GenModel:
    spec: GenModelSpec
    d: int
    mu: np.ndarray = None
    cov: np.ndarray = None
    nu: float = None
    marginals: tuple = ()
    garch: tuple = ()
    copula: object = None
    dcc: DccModel = None
    flags: tuple = field(default=(), compare=False)

    def to_dict(self) -> dict:
        payload = {"spec": self.spec.id, "d": self.d, "nu": self.nu}
        if self.mu is not None:
            payload["mu"] = self.mu.tolist()
        if self.cov is not None:
            payload["cov"] = self.cov.tolist()
        payload["marginals"] = [m.to_dict() for m in self.marginals]
        payload["garch"] = [g.to_dict() for g in self.garch]
        if self.copula is not None:
            payload["copula"] = self.copula.to_dict()
        if self.dcc is not None:
            payload["dcc"] = self.dcc.to_dict()
        return payload


def _mvt_profile_nu(X, mu, S) -> float:
    def negloglik(nu):
        shape = S * (nu - 2.0) / nu
        return -float(np.sum(stats.multivariate_t(loc=mu, shape=shape, df=nu).logpdf(X)))

    return float(optimize.minimize_scalar(negloglik, bounds=(2.1, 200.0), method="bounded").x)


def _as_matrix(window) -> np.ndarray:
    returns = getattr(window, "returns", window)
    return np.asarray(returns, dtype=float)


def fit_generative(
    spec: GenModelSpec,
    window,
    marginal_families=DEFAULT_MARGINAL_FAMILIES,
    include_joe=True,
    min_window=91,
) -> GenModel:
    X = _as_matrix(window)
    T, D = X.shape
    if T < min_window:
        raise FitError(f"window has {T} rows, need at least {min_window}", stage=spec.id)

    try:
        if spec.dependence == Dependence.MV_GAUSSIAN:
            cov = np.atleast_2d(np.cov(X, rowvar=False))
            return GenModel(spec, D, mu=X.mean(axis=0), cov=cov)

        if spec.dependence == Dependence.MV_STUDENT_T:
            mu = X.mean(axis=0)
            S = np.atleast_2d(np.cov(X, rowvar=False))
            nu = _mvt_profile_nu(X, mu, S)
            return GenModel(spec, D, mu=mu, cov=S, nu=nu)

        if spec.dependence == Dependence.DCC:
            dcc = fit_dcc_garch(X, spec.dist)
            return GenModel(spec, D, dcc=dcc, garch=dcc.garch, flags=dcc.flags)

        garch = ()
        Z = X
        if spec.garch_prefilter:
            fitted = []
            Z = np.empty_like(X)
            for d in range(D):
                try:
                    model = fit_garch11(X[:, d])
                except FitError as exc:
                    raise exc.at(f"garch asset {d}")
                fitted.append(model)
                Z[:, d], _ = garch_filter(model, X[:, d])
            garch = tuple(fitted)

        if spec.marginal_mode == MarginalMode.PARAMETRIC:
            try:
                marginals = tuple(fit_marginals(Z, marginal_families))
            except FitError as exc:
                raise exc.at("marginals")
            U = clamp_unit(np.column_stack([m.cdf(Z[:, d]) for d, m in enumerate(marginals)]))
        else:
            marginals = tuple(fit_marginal(Z[:, d], MarginalFamily.EMPIRICAL) for d in range(D))
            U = pseudo_observations(Z)

        try:
            if spec.dependence == Dependence.RVINE:
                copula = fit_rvine(U, preset_families(spec.preset, include_joe))
            else:
                kind = CopulaFamily.GAUSSIAN if spec.dependence == Dependence.GAUSS_COPULA else CopulaFamily.STUDENT_T
                copula = fit_elliptical_copula(U, kind)
        except FitError as exc:
            raise exc.at("dependence")

        flags = tuple(copula.flags) + tuple(f for g in garch for f in g.flags)
        return GenModel(spec, D, marginals=marginals, garch=garch, copula=copula, flags=flags)
    except FitError as exc:
        raise exc.at(spec.id)


# =====================================================
# SIMULATION
# =====================================================


def _chol(cov):
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        logger.warning("sample covariance not positive definite, adding jitter")
        return np.linalg.cholesky(cov + 1e-10 * np.eye(cov.shape[0]))


def simulate_returns(model: GenModel, n: int, seed, asof="") -> ScenarioMatrix:
    if n < MIN_SCENARIOS:
        raise ValueError(f"need at least {MIN_SCENARIOS} scenarios, got {n}")
    rng = as_generator(seed, "scenarios", model.spec.id)
    spec = model.spec
    D = model.d

    if spec.dependence == Dependence.MV_GAUSSIAN:
        values = model.mu + rng.standard_normal((n, D)) @ _chol(model.cov).T
    elif spec.dependence == Dependence.MV_STUDENT_T:
        shape = model.cov * (model.nu - 2.0) / model.nu
        z = rng.standard_normal((n, D)) @ _chol(shape).T
        w = rng.chisquare(model.nu, n)
        values = model.mu + z / np.sqrt(w / model.nu)[:, None]
    elif spec.dependence == Dependence.DCC:
        values = simulate_dcc(model.dcc, n, rng, model_id=spec.id, asof=asof).values
    else:
        if isinstance(model.copula, RvineModel):
            U = sample_rvine(model.copula, n, rng)
        else:
            U = sample_elliptical_copula(model.copula, n, rng)
        U = clamp_unit(U)
        Z = np.column_stack([m.ppf(U[:, d]) for d, m in enumerate(model.marginals)])
        if spec.garch_prefilter:
            mu = np.array([g.mu for g in model.garch])
            h_next = np.array([garch_forecast_variance(g) for g in model.garch])
            values = mu + np.sqrt(h_next) * Z
        else:
            values = Z

    clamped = values < RETURN_FLOOR
    flags = tuple(model.flags)
    if clamped.any():
        count = int(clamped.sum())
        logger.warning("%s: clamped %d simulated returns at -1", spec.id, count)
        values = np.where(clamped, RETURN_FLOOR, values)
        flags = flags + (f"clamped:{count}",)

    # a caller-owned Generator carries no seed of its own
    recorded = int(seed) if isinstance(seed, (int, np.integer)) else None
    return ScenarioMatrix(values, model_id=spec.id, asof=asof, seed=recorded, flags=flags)


# =====================================================
# PERSISTENCE
# =====================================================


def save_scenarios(scenarios: ScenarioMatrix, path) -> None:
    path = Path(path)
    np.ascontiguousarray(scenarios.values, dtype="<f8").tofile(path)
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(scenarios.sidecar(), sort_keys=True))


def load_scenarios(path) -> ScenarioMatrix:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    values = np.fromfile(path, dtype="<f8").reshape(meta["N"], meta["D"])
    return ScenarioMatrix(values, model_id=meta["model_id"], asof=meta["asof"], seed=meta["seed"])

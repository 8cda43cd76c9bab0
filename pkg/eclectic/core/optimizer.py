import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .choices import ObjectiveTag
from .helpers import as_generator, equal_long, equal_short
from .objectives import ObjectiveContext, ObjectiveKind, evaluate_objective

logger = logging.getLogger(__name__)

PROJECTION_TOL = 1e-9
PROJECTION_MAX_ITER = 100
N_RANDOM_STARTS = 8
SIMPLEX_XATOL = 1e-7
SIMPLEX_MAXFEV = 2000
# finite stand-in for the -inf sentinel inside the simplex search
PENALTY = 1e12


@dataclass(frozen=True)
class SolveReport:
    w_star: np.ndarray
    objective_value: float
    n_restarts: int
    converged: bool
    wall_time: float = field(default=0.0, compare=False)
    flags: tuple = ()

    def to_dict(self) -> dict:
        return {
            "w_star": [float(x) for x in self.w_star],
            "objective_value": float(self.objective_value),
            "n_restarts": self.n_restarts,
            "converged": self.converged,
            "wall_time": self.wall_time,
            "flags": list(self.flags),
        }


def _project(z, bound):
    w = np.asarray(z, dtype=float).copy()
    total = np.abs(w).sum()
    if total == 0.0 or not np.isfinite(total):
        return equal_long(w.size), True
    for _ in range(PROJECTION_MAX_ITER):
        w = np.clip(w / np.abs(w).sum(), -bound, bound)
        if abs(np.abs(w).sum() - 1.0) <= PROJECTION_TOL:
            return w, True
    return w, False


def project_feasible(z, m=5.0) -> np.ndarray:
    """Map z onto {||w||_1 = 1, |w_d| <= m/D} by alternating rescale and clamp."""
    z = np.asarray(z, dtype=float)
    w, ok = _project(z, m / z.size)
    if not ok:
        logger.warning("projection did not reach a fixed point within %d iterations (m=%s)", PROJECTION_MAX_ITER, m)
    return w


def random_feasible(rng, d: int, m=5.0) -> np.ndarray:
    return project_feasible(rng.uniform(-1.0, 1.0, d), m)


def _better(candidate, incumbent) -> bool:
    value, w = candidate
    best_value, best_w = incumbent
    if value != best_value:
        return value > best_value
    return tuple(w) < tuple(best_w)


def solve_weights(kind: ObjectiveKind, ctx: ObjectiveContext, m=5.0, seed=0) -> SolveReport:
    started = time.perf_counter()
    D = ctx.d
    bound = m / D

    if kind.tag in (ObjectiveTag.LONG_PARITY, ObjectiveTag.SHORT_PARITY):
        w = equal_long(D) if kind.tag == ObjectiveTag.LONG_PARITY else equal_short(D)
        w = project_feasible(w, m)
        value = evaluate_objective(kind, w, ctx)
        return SolveReport(w, value, 0, True, time.perf_counter() - started)

    rng = as_generator(seed, "optimizer", kind.label)
    starts = [project_feasible(ctx.w1, m), equal_long(D), equal_short(D)]
    starts += [random_feasible(rng, D, m) for _ in range(N_RANDOM_STARTS)]

    def negative(z):
        value = evaluate_objective(kind, _project(z, bound)[0], ctx)
        return -value if np.isfinite(value) else PENALTY

    best = (-np.inf, starts[0])
    converged = False
    flags = []
    for start in starts:
        start_value = evaluate_objective(kind, start, ctx)
        if _better((start_value, start), best):
            best = (start_value, start)
        result = optimize.minimize(
            negative,
            start,
            method="Nelder-Mead",
            options={"xatol": SIMPLEX_XATOL, "fatol": np.inf, "maxfev": SIMPLEX_MAXFEV},
        )
        w = _project(result.x, bound)[0]
        value = evaluate_objective(kind, w, ctx)
        converged = converged or bool(result.success)
        if _better((value, w), best):
            best = (value, w)

    value, w = best
    if not np.isfinite(value):
        logger.warning("%s: no start reached a finite objective, falling back to equal-long weights", kind.label)
        w = equal_long(D)
        value = evaluate_objective(kind, w, ctx)
        flags.append("no_finite_start")
        converged = False
    elif not converged:
        flags.append("maxfev")
    return SolveReport(
        np.asarray(w, dtype=float),
        float(value),
        len(starts),
        converged,
        time.perf_counter() - started,
        tuple(flags),
    )

"""
Regular vine copulas.

Tree 1 is the maximum spanning tree on |Kendall's tau| of the
pseudo-observations. Tree k+1 connects edges of tree k that share a node
(proximity condition), again keeping the maximum spanning tree, and is
fitted on h-transformed data. Conditional distributions F(x | S) are
evaluated recursively through the unique edge whose conditioned set holds
x and whose full variable set is S + {x}.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import minimum_spanning_tree

from .copula import (
    BicopModel,
    bicop_hfunc,
    bicop_hfunc_swap,
    bicop_hinv,
    bicop_hinv_swap,
    bicop_logpdf,
    fit_bicop,
    kendall_tau,
)
from .exceptions import FitError
from .helpers import as_generator, clamp_unit

logger = logging.getLogger(__name__)

MIN_VINE_OBS = 30


@dataclass(frozen=True)
class VineEdge:
    tree: int
    nodes: tuple
    conditioned: tuple
    conditioning: tuple
    copula: BicopModel
    tau: float = 0.0

    @property
    def variables(self) -> frozenset:
        return frozenset(self.conditioned) | frozenset(self.conditioning)

    def partner(self, var):
        a, b = self.conditioned
        return b if var == a else a

    def to_dict(self) -> dict:
        return {
            "tree": self.tree,
            "nodes": list(self.nodes),
            "conditioned": list(self.conditioned),
            "conditioning": list(self.conditioning),
            "copula": self.copula.to_dict(),
            "tau": self.tau,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "VineEdge":
        return cls(
            tree=int(payload["tree"]),
            nodes=tuple(payload["nodes"]),
            conditioned=tuple(payload["conditioned"]),
            conditioning=tuple(payload["conditioning"]),
            copula=BicopModel.from_dict(payload["copula"]),
            tau=float(payload.get("tau", 0.0)),
        )


@dataclass(frozen=True)
class RvineModel:
    d: int
    trees: tuple
    order: tuple = ()
    flags: tuple = field(default=(), compare=False)

    @property
    def edges(self):
        for tree in self.trees:
            yield from tree

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "order": list(self.order),
            "trees": [[edge.to_dict() for edge in tree] for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "RvineModel":
        return cls(
            d=int(payload["d"]),
            trees=tuple(tuple(VineEdge.from_dict(e) for e in tree) for tree in payload["trees"]),
            order=tuple(payload.get("order", ())),
        )


class _Conditionals:
    """Memoized F(var | S) over a batch of uniforms."""

    def __init__(self, edges, u):
        self.u = u
        self.memo = {}
        self.index = {}
        for edge in edges:
            for var in edge.conditioned:
                self.index[(var, edge.variables)] = edge

    def set_column(self, var, values):
        self.u[:, var] = values
        self.memo[(var, frozenset())] = values

    def __call__(self, var, given) -> np.ndarray:
        given = frozenset(given)
        key = (var, given)
        if key in self.memo:
            return self.memo[key]
        if not given:
            value = self.u[:, var]
        else:
            edge = self.index.get((var, given | {var}))
            if edge is None:
                raise KeyError(f"no vine edge conditions {var} on {sorted(given)}")
            other = edge.partner(var)
            base = frozenset(edge.conditioning)
            x, y = self(var, base), self(other, base)
            if var == edge.conditioned[0]:
                value = bicop_hfunc(edge.copula, x, y)
            else:
                value = bicop_hfunc_swap(edge.copula, y, x)
        self.memo[key] = value
        return value


def _max_spanning_tree(weights: np.ndarray):
    """Edges (i, j) with i < j of the maximum spanning tree on `weights` (NaN = no edge)."""
    graph = np.where(np.isnan(weights), 0.0, 2.0 - np.abs(weights))
    tree = minimum_spanning_tree(graph).tocoo()
    return sorted((min(i, j), max(i, j)) for i, j in zip(tree.row.tolist(), tree.col.tolist()))


def _fit_edge(u_pair, families):
    try:
        return fit_bicop(u_pair, families)
    except FitError as exc:
        logger.warning("degenerate vine edge (%s), using Independence", exc)
        return BicopModel(flags=("degenerate",))


def fit_rvine(u, families, labels=None) -> RvineModel:
    u = clamp_unit(np.asarray(u, dtype=float))
    n, D = u.shape
    if D < 2:
        raise FitError("a vine needs at least 2 variables", stage="vine")
    if n < MIN_VINE_OBS:
        raise FitError(f"vine fitting needs at least {MIN_VINE_OBS} rows, got {n}", stage="vine")

    trees = []
    cond = _Conditionals([], u.copy())

    # tree 1 on the variables themselves
    tau = np.full((D, D), np.nan)
    for i in range(D):
        for j in range(i + 1, D):
            tau[i, j] = tau[j, i] = kendall_tau(u[:, i], u[:, j])
    first = []
    for i, j in _max_spanning_tree(tau):
        copula = _fit_edge(np.column_stack([u[:, i], u[:, j]]), families)
        first.append(VineEdge(1, (i, j), (i, j), (), copula, float(tau[i, j])))
    trees.append(tuple(first))
    _register(cond, first)

    for level in range(2, D):
        previous = trees[-1]
        m = len(previous)
        pair_tau = np.full((m, m), np.nan)
        pairs = {}
        for i in range(m):
            for j in range(i + 1, m):
                e1, e2 = previous[i], previous[j]
                if not set(e1.nodes) & set(e2.nodes):
                    continue
                shared = e1.variables & e2.variables
                a = next(iter(e1.variables - shared))
                b = next(iter(e2.variables - shared))
                x, y = cond(a, shared), cond(b, shared)
                pairs[(i, j)] = (a, b, tuple(sorted(shared)), x, y)
                pair_tau[i, j] = pair_tau[j, i] = kendall_tau(x, y)

        current = []
        for i, j in _max_spanning_tree(pair_tau):
            a, b, shared, x, y = pairs[(i, j)]
            copula = _fit_edge(np.column_stack([x, y]), families)
            current.append(VineEdge(level, (i, j), (a, b), shared, copula, float(pair_tau[i, j])))
        trees.append(tuple(current))
        _register(cond, current)

    order = tuple(labels) if labels is not None else tuple(range(D))
    model = RvineModel(D, tuple(trees), order)
    problems = check_rvine_structure(model)
    if problems:
        raise FitError("invalid vine structure: " + "; ".join(problems), stage="vine")
    return model


def _register(cond: _Conditionals, edges):
    for edge in edges:
        for var in edge.conditioned:
            cond.index[(var, edge.variables)] = edge


def check_rvine_structure(model: RvineModel) -> list:
    """Structural problems of a vine (empty list when valid)."""
    problems = []
    D = model.d
    if len(model.trees) != D - 1:
        problems.append(f"expected {D - 1} trees, found {len(model.trees)}")
    for k, tree in enumerate(model.trees, start=1):
        if len(tree) != D - k:
            problems.append(f"tree {k} has {len(tree)} edges, expected {D - k}")
        for edge in tree:
            if len(edge.conditioning) != k - 1 or len(set(edge.conditioned)) != 2:
                problems.append(f"tree {k} edge {edge.conditioned}|{edge.conditioning} has wrong set sizes")

    if model.trees:
        seen = set()
        parent = list(range(D))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for edge in model.trees[0]:
            i, j = edge.nodes
            seen.update((i, j))
            ri, rj = find(i), find(j)
            if ri == rj:
                problems.append(f"tree 1 has a cycle through {i}-{j}")
            parent[ri] = rj
        if seen != set(range(D)) and D > 1:
            problems.append("tree 1 does not span all variables")

    for k in range(1, len(model.trees)):
        previous = model.trees[k - 1]
        for edge in model.trees[k]:
            i, j = edge.nodes
            e1, e2 = previous[i], previous[j]
            if not set(e1.nodes) & set(e2.nodes):
                problems.append(f"tree {k + 1} edge {edge.conditioned} violates proximity")
            if edge.variables != e1.variables | e2.variables:
                problems.append(f"tree {k + 1} edge {edge.conditioned} has inconsistent sets")
    return problems


def _peel(model: RvineModel):
    """Simulation order and, per variable, its edges from tree 1 upwards."""
    remaining = {edge for edge in model.edges}
    columns = []
    for _ in range(model.d - 1):
        top = max(remaining, key=lambda e: (e.tree, e.conditioned))
        var = top.conditioned[0]
        column = sorted((e for e in remaining if var in e.conditioned), key=lambda e: e.tree)
        remaining.difference_update(column)
        columns.append((var, column))
    placed = {var for var, _ in columns}
    first = next(v for v in range(model.d) if v not in placed)
    columns.append((first, []))
    return list(reversed(columns))


def rvine_inverse_rosenblatt(model: RvineModel, w) -> np.ndarray:
    """Map i.i.d. uniforms `w` (n x D) to a sample from the vine."""
    w = clamp_unit(np.asarray(w, dtype=float))
    n = w.shape[0]
    cond = _Conditionals(list(model.edges), np.empty((n, model.d)))
    for var, column in _peel(model):
        p = w[:, var]
        for edge in reversed(column):
            other = edge.partner(var)
            y = cond(other, edge.conditioning)
            if var == edge.conditioned[0]:
                p = bicop_hinv(edge.copula, p, y)
            else:
                p = bicop_hinv_swap(edge.copula, p, y)
        cond.set_column(var, p)
    return cond.u


def rvine_rosenblatt(model: RvineModel, u) -> np.ndarray:
    """Forward transform: dependent uniforms to i.i.d. uniforms."""
    u = clamp_unit(np.asarray(u, dtype=float))
    cond = _Conditionals(list(model.edges), u.copy())
    out = np.empty_like(u)
    before = set()
    for var, _ in _peel(model):
        out[:, var] = cond(var, before)
        before.add(var)
    return out


def sample_rvine(model: RvineModel, n: int, seed) -> np.ndarray:
    rng = as_generator(seed, "rvine")
    return rvine_inverse_rosenblatt(model, rng.random((n, model.d)))


def rvine_loglik(model: RvineModel, u) -> float:
    u = clamp_unit(np.asarray(u, dtype=float))
    cond = _Conditionals(list(model.edges), u.copy())
    total = 0.0
    for edge in model.edges:
        a, b = edge.conditioned
        given = edge.conditioning
        total += float(np.sum(bicop_logpdf(edge.copula, cond(a, given), cond(b, given))))
    return total

"""Linear additive-noise structural causal models.

Instances are numpy arrays whose last axis follows ``graph.nodes``; leading
axes are batch dimensions, so every operation here works on one row or on a
whole data matrix.
"""
from __future__ import annotations

import graphlib
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .exceptions import GraphError, InvalidActionError, SchemaError, SingularDesignError

#: Gram matrices worse conditioned than this are solved with a pseudo-inverse.
GRAM_CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class CausalGraph:
    """A DAG over named features.

    ``parents`` maps each node to its ordered parent tuple.  Node order is the
    declaration order of ``parents``; ``order`` is a topological sort that
    keeps declaration order among independent nodes.
    """

    parents: Mapping[str, tuple[str, ...]]
    nodes: tuple[str, ...] = field(init=False)
    order: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        parents = {str(k): tuple(str(p) for p in v) for k, v in self.parents.items()}
        for node, pas in parents.items():
            for p in pas:
                if p not in parents:
                    raise GraphError(f"node {node!r} lists unknown parent {p!r}")
            if len(set(pas)) != len(pas):
                raise GraphError(f"node {node!r} lists a parent twice")
        sorter = graphlib.TopologicalSorter()
        for node, pas in parents.items():
            sorter.add(node, *pas)
        try:
            sorter.prepare()
        except graphlib.CycleError as exc:
            raise GraphError(f"graph has a cycle: {exc.args[1]}") from None
        rank = {n: i for i, n in enumerate(parents)}
        order = []
        while sorter.is_active():
            ready = sorted(sorter.get_ready(), key=rank.__getitem__)
            order.extend(ready)
            sorter.done(*ready)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "nodes", tuple(parents))
        object.__setattr__(self, "order", tuple(order))

    @classmethod
    def from_adjacency(cls, adjacency: Mapping[str, Sequence[str] | None]) -> "CausalGraph":
        return cls({k: tuple(v or ()) for k, v in adjacency.items()})

    def index(self, node: str) -> int:
        try:
            return self.nodes.index(node)
        except ValueError:
            raise SchemaError(f"unknown node {node!r}") from None

    def is_root(self, node: str) -> bool:
        return not self.parents[node]

    def children(self, node: str) -> tuple[str, ...]:
        return tuple(n for n in self.nodes if node in self.parents[n])

    def descendants(self, node: str) -> set[str]:
        out, stack = set(), [node]
        while stack:
            for c in self.children(stack.pop()):
                if c not in out:
                    out.add(c)
                    stack.append(c)
        return out

    def to_dict(self) -> dict[str, list[str]]:
        return {n: list(p) for n, p in self.parents.items()}


class StructuralEquation:
    """Mechanism ``f_j`` of one non-root node; the exogenous term is added outside."""

    child: str
    parents: tuple[str, ...]

    def __call__(self, parent_values: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class LinearEquation(StructuralEquation):
    child: str
    parents: tuple[str, ...]
    coefficients: tuple[float, ...]
    intercept: float

    def __post_init__(self):
        if len(self.coefficients) != len(self.parents):
            raise GraphError(
                f"equation for {self.child!r}: {len(self.coefficients)} coefficients "
                f"for {len(self.parents)} parents"
            )

    def __call__(self, parent_values):
        return np.asarray(parent_values, dtype=float) @ np.asarray(self.coefficients) + self.intercept

    def coefficient(self, parent: str) -> float:
        return self.coefficients[self.parents.index(parent)]

    def to_dict(self):
        return {
            "child": self.child,
            "parents": list(self.parents),
            "coefficients": list(self.coefficients),
            "intercept": self.intercept,
        }


@dataclass(frozen=True)
class CausalModel:
    graph: CausalGraph
    equations: Mapping[str, StructuralEquation]

    def __post_init__(self):
        for node in self.graph.nodes:
            has_eq = node in self.equations
            if self.graph.is_root(node) and has_eq:
                raise GraphError(f"root node {node!r} must not carry an equation")
            if not self.graph.is_root(node):
                if not has_eq:
                    raise GraphError(f"non-root node {node!r} has no equation")
                if tuple(self.equations[node].parents) != self.graph.parents[node]:
                    raise GraphError(f"equation parents of {node!r} do not match the graph")

    @property
    def nodes(self) -> tuple[str, ...]:
        return self.graph.nodes

    def _f(self, node: str, x: np.ndarray) -> np.ndarray:
        idx = [self.graph.index(p) for p in self.graph.parents[node]]
        return self.equations[node](x[..., idx])

    def _check_width(self, x) -> np.ndarray:
        if isinstance(x, Mapping):
            missing = [n for n in self.nodes if n not in x]
            if missing:
                raise SchemaError(f"instance lacks node(s) {missing}")
            x = np.stack([np.asarray(x[n], dtype=float) for n in self.nodes], axis=-1)
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (len(self.nodes),):
            raise SchemaError(
                f"instance has {x.shape[-1] if x.ndim else 0} features, model expects "
                f"{len(self.nodes)} ({', '.join(self.nodes)})"
            )
        return x

    def abduct(self, x) -> np.ndarray:
        return abduct(self, x)

    def reconstruct(self, u, action=None) -> np.ndarray:
        return reconstruct(self, u, action)

    def counterfactual(self, x, action) -> np.ndarray:
        return counterfactual(self, x, action)

    def effect_matrix(self, intervened: Sequence[str]) -> np.ndarray:
        """Columns give ``x_scf - x_f`` per unit delta on each intervened node.

        Only meaningful for linear mechanisms, where the counterfactual is
        affine in the deltas.
        """
        d = len(self.nodes)
        cols = []
        base = np.zeros(d)
        for node in intervened:
            deltas = {n: 0.0 for n in intervened}
            deltas[node] = 1.0
            cols.append(counterfactual(self, base, deltas) - base)
        return np.stack(cols, axis=1) if cols else np.zeros((d, 0))

    def to_dict(self) -> dict:
        return {
            "graph": self.graph.to_dict(),
            "equations": [self.equations[n].to_dict() for n in self.graph.order if n in self.equations],
        }


def fit_causal_model(dataset, graph: CausalGraph) -> CausalModel:
    """Fit one OLS equation with intercept per non-root node."""
    equations = {}
    for node in graph.order:
        pas = graph.parents[node]
        if not pas:
            continue
        y = _column(dataset, node)
        design = np.column_stack([np.ones(len(y))] + [_column(dataset, p) for p in pas])
        n, k = design.shape
        if n < len(pas) + 2:
            raise SingularDesignError(node, f"{n} rows for {len(pas)} parent(s) plus intercept")
        if np.linalg.matrix_rank(design) < k:
            raise SingularDesignError(node, "design matrix is rank deficient")
        gram = design.T @ design
        if np.linalg.cond(gram) > GRAM_CONDITION_LIMIT:
            beta = np.linalg.pinv(design) @ y
        else:
            beta = np.linalg.solve(gram, design.T @ y)
        equations[node] = LinearEquation(
            child=node,
            parents=pas,
            coefficients=tuple(float(b) for b in beta[1:]),
            intercept=float(beta[0]),
        )
    return CausalModel(graph, equations)


def _column(dataset, name: str) -> np.ndarray:
    try:
        col = dataset.column(name) if hasattr(dataset, "column") else dataset[name]
    except KeyError:
        raise SchemaError(f"dataset has no column {name!r}") from None
    return np.asarray(col, dtype=float)


def abduct(model: CausalModel, x) -> np.ndarray:
    """Exogenous values ``u_j = x_j - f_j(pa_j)`` (``u_j = x_j`` on roots)."""
    x = model._check_width(x)
    u = x.copy()
    for j, node in enumerate(model.nodes):
        if not model.graph.is_root(node):
            u[..., j] = x[..., j] - model._f(node, x)
    return u


def reconstruct(model: CausalModel, u, action=None) -> np.ndarray:
    """Push exogenous values forward through the equations, then apply ``action``."""
    u = model._check_width(u)
    x = np.empty_like(u)
    for node in model.graph.order:
        j = model.graph.index(node)
        if model.graph.is_root(node):
            x[..., j] = u[..., j]
        else:
            x[..., j] = model._f(node, x) + u[..., j]
    if action:
        x = counterfactual(model, x, action)
    return x


def action_deltas(action) -> dict:
    if action is None:
        return {}
    deltas = getattr(action, "deltas", action)
    return dict(deltas)


def counterfactual(model: CausalModel, x_factual, action) -> np.ndarray:
    """Structural counterfactual of ``x_factual`` under additive interventions.

    Intervened nodes take ``x_j + delta_j`` and are cut from their parents;
    every other node keeps its factual noise, i.e. moves by
    ``f_j(pa_scf) - f_j(pa_f)``.  Delta values may be arrays, in which case
    they broadcast against the batch axes of ``x_factual``.
    """
    x = model._check_width(x_factual)
    deltas = action_deltas(action)
    for node, value in deltas.items():
        if node not in model.graph.parents:
            raise InvalidActionError(f"action intervenes on unknown node {node!r}")
        if not np.all(np.isfinite(value)):
            raise InvalidActionError(f"delta for {node!r} is not finite")
    batch = np.broadcast_shapes(x.shape[:-1], *(np.shape(v) for v in deltas.values()))
    xf = np.broadcast_to(x, batch + x.shape[-1:])
    out = np.array(xf, dtype=float)
    for node in model.graph.order:
        j = model.graph.index(node)
        if node in deltas:
            out[..., j] = xf[..., j] + deltas[node]
        elif not model.graph.is_root(node):
            idx = [model.graph.index(p) for p in model.graph.parents[node]]
            moved = np.any(out[..., idx] != xf[..., idx], axis=-1)
            if np.any(moved):
                # rows whose parents did not move keep their factual value bit for bit
                shifted = xf[..., j] + model._f(node, out) - model._f(node, xf)
                out[..., j] = np.where(moved, shifted, xf[..., j])
    return out

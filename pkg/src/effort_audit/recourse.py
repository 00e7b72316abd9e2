"""Recourse through minimal interventions on a linear SCM.

With linear structural equations and a logistic decision model, the
counterfactual of an action on the node set J is ``x + M_J @ delta`` and the
flip condition is a half-space in ``delta``.  Each J therefore gives a small
linear program with a weighted L1 objective, which :class:`MintSolver`
solves exactly by enumerating vertices orthant by orthant.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .exceptions import InvalidActionError, PreconditionError, SchemaError
from .models import Classifier
from .scm import CausalModel

ACTIONABILITY = ("immutable", "mutable", "actionable")
DIRECTIONS = ("free", "increase", "decrease")

#: required score margin above 0.5 for a flip
FLIP_MARGIN = 1e-6
_FEAS_TOL = 1e-9
_TIE_TOL = 1e-9


@dataclass(frozen=True)
class Action:
    """Additive interventions ``node -> delta``; the key set is the intervention set J."""

    deltas: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for node, value in dict(self.deltas).items():
            value = float(value)
            if not math.isfinite(value):
                raise InvalidActionError(f"delta for {node!r} is not finite")
            clean[str(node)] = value
        object.__setattr__(self, "deltas", clean)

    @property
    def nodes(self) -> tuple[str, ...]:
        return tuple(self.deltas)

    def __len__(self):
        return len(self.deltas)

    def to_dict(self) -> dict[str, float]:
        return dict(self.deltas)


@dataclass(frozen=True)
class ConstraintSet:
    """Feasibility (actionability, direction, delta boxes) and plausibility bounds.

    Nodes missing from ``actionability`` are treated as mutable but
    non-actionable.  Bounds use ``-inf``/``inf`` for "unbounded".
    """

    actionability: Mapping[str, str]
    direction: Mapping[str, str] = field(default_factory=dict)
    delta_bounds: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    plausibility: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    sensitive: str | None = None

    def __post_init__(self):
        for node, cls in self.actionability.items():
            if cls not in ACTIONABILITY:
                raise InvalidActionError(f"unknown actionability {cls!r} for {node!r}")
        for node, d in self.direction.items():
            if d not in DIRECTIONS:
                raise InvalidActionError(f"unknown direction {d!r} for {node!r}")
        for name, bounds in (("delta", self.delta_bounds), ("plausibility", self.plausibility)):
            for node, (lo, hi) in bounds.items():
                if math.isnan(lo) or math.isnan(hi) or lo > hi:
                    raise InvalidActionError(f"invalid {name} bounds {lo, hi} for {node!r}")
        if self.sensitive is not None and self.actionability.get(self.sensitive) == "actionable":
            raise InvalidActionError(f"the sensitive attribute {self.sensitive!r} cannot be actionable")

    @property
    def actionable(self) -> tuple[str, ...]:
        return tuple(n for n, c in self.actionability.items() if c == "actionable")

    def delta_box(self, node: str) -> tuple[float, float]:
        lo, hi = self.delta_bounds.get(node, (-math.inf, math.inf))
        d = self.direction.get(node, "free")
        if d == "increase":
            lo = max(lo, 0.0)
        elif d == "decrease":
            hi = min(hi, 0.0)
        return lo, hi

    def plausible_range(self, node: str) -> tuple[float, float]:
        return self.plausibility.get(node, (-math.inf, math.inf))

    def check_nodes(self, nodes: Sequence[str]) -> None:
        known = set(nodes)
        for mapping in (self.actionability, self.direction, self.delta_bounds, self.plausibility):
            unknown = set(mapping) - known
            if unknown:
                raise SchemaError(f"constraints mention unknown node(s) {sorted(unknown)}")

    def validate(self, action: Action) -> None:
        for node, delta in action.deltas.items():
            if self.actionability.get(node) != "actionable":
                raise InvalidActionError(f"node {node!r} is not actionable")
            lo, hi = self.delta_box(node)
            if not lo - _FEAS_TOL <= delta <= hi + _FEAS_TOL:
                raise InvalidActionError(f"delta {delta} on {node!r} outside [{lo}, {hi}]")

    def to_dict(self) -> dict:
        return {
            "actionability": dict(self.actionability),
            "direction": dict(self.direction),
            "delta_bounds": {k: list(v) for k, v in self.delta_bounds.items()},
            "plausibility": {k: list(v) for k, v in self.plausibility.items()},
            "sensitive": self.sensitive,
        }


@dataclass(frozen=True)
class CostSpec:
    ranges: Mapping[str, float]
    weights: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for node, r in self.ranges.items():
            if not r > 0:
                raise ValueError(f"range of {node!r} must be positive, got {r}")
        for node, w in self.weights.items():
            if not w > 0:
                raise ValueError(f"weight of {node!r} must be positive, got {w}")

    def unit_cost(self, node: str) -> float:
        try:
            return self.weights.get(node, 1.0) / self.ranges[node]
        except KeyError:
            raise SchemaError(f"cost spec has no range for {node!r}") from None


def cost(action: Action, spec: CostSpec) -> float:
    """Weighted L1 norm of range-normalized deltas."""
    return math.fsum(spec.unit_cost(n) * abs(d) for n, d in action.deltas.items())


class Recourse(NamedTuple):
    action: Action
    cost: float
    counterfactual: np.ndarray


def _instance(model: CausalModel, x) -> np.ndarray:
    if isinstance(x, Mapping):
        missing = [n for n in model.nodes if n not in x]
        if missing:
            raise SchemaError(f"instance lacks node(s) {missing}")
        return np.array([float(x[n]) for n in model.nodes])
    x = np.asarray(x, dtype=float)
    if x.shape != (len(model.nodes),):
        raise SchemaError(f"instance must be a vector over {model.nodes}")
    return x


def _feature_index(model: CausalModel, h: Classifier) -> list[int]:
    missing = [f for f in h.features if f not in model.nodes]
    if missing:
        raise SchemaError(f"classifier feature(s) {missing} are not SCM nodes")
    return [model.nodes.index(f) for f in h.features]


def _subsets(nodes: Sequence[str]):
    for k in range(1, len(nodes) + 1):
        yield from itertools.combinations(nodes, k)


def _lp_vertices(G: np.ndarray, r: np.ndarray, c: np.ndarray):
    """Minimize ``c @ v`` over the pointed polyhedron ``G v >= r`` by vertex enumeration.

    Returns ``(value, v)`` or ``None`` when infeasible.  ``G`` must contain
    rows that make the polyhedron pointed (the caller adds sign rows).
    """
    m, k = G.shape
    combos = np.array(list(itertools.combinations(range(m), k)))
    A = G[combos]
    rhs = r[combos]
    det = np.linalg.det(A)
    ok = np.abs(det) > 1e-12 * np.prod(np.linalg.norm(A, axis=2), axis=1)
    if not ok.any():
        return None
    V = np.linalg.solve(A[ok], rhs[ok][..., None])[..., 0]
    slack = V @ G.T - r
    tol = _FEAS_TOL * (1.0 + np.abs(r))
    feasible = np.all(slack >= -tol, axis=1)
    if not feasible.any():
        return None
    V = V[feasible]
    vals = V @ c
    i = int(np.argmin(vals))
    return float(vals[i]), V[i]


class MintSolver:
    """Exact minimal-intervention recourse for one (model, classifier, constraints, cost) setup.

    Effect matrices of every candidate intervention set are computed once, so
    the same solver can be reused across many factual instances.
    """

    def __init__(self, model: CausalModel, h: Classifier, constraints: ConstraintSet, spec: CostSpec,
                 margin: float = FLIP_MARGIN):
        constraints.check_nodes(model.nodes)
        self.model, self.h, self.constraints, self.spec = model, h, constraints, spec
        self.feature_index = _feature_index(model, h)
        a, c = h.linear_form()
        self.a = np.zeros(len(model.nodes))
        self.a[self.feature_index] = a
        self.c = c
        p = 0.5 + margin
        self.target_logit = math.log(p / (1.0 - p))
        self.actionable = tuple(n for n in model.nodes if n in constraints.actionable)
        for n in self.actionable:
            spec.unit_cost(n)
        self.plaus = np.array([constraints.plausible_range(n) for n in model.nodes])
        self.subsets = list(_subsets(self.actionable))
        self.effects = {J: model.effect_matrix(J) for J in self.subsets}

    def _solve_subset(self, x: np.ndarray, J: tuple[str, ...]):
        M = self.effects[J]
        k = len(J)
        rows, rhs = [], []
        rows.append(self.a @ M)
        rhs.append(self.target_logit - self.a @ x - self.c)
        if not np.any(rows[0]):
            return None
        for j, node in enumerate(J):
            lo, hi = self.constraints.delta_box(node)
            e = np.zeros(k)
            e[j] = 1.0
            if math.isfinite(lo):
                rows.append(e)
                rhs.append(lo)
            if math.isfinite(hi):
                rows.append(-e)
                rhs.append(-hi)
        for i in range(len(x)):
            lo, hi = self.plaus[i]
            row = M[i]
            if not np.any(row):
                if not lo <= x[i] <= hi:
                    return None
                continue
            if math.isfinite(lo):
                rows.append(row)
                rhs.append(lo - x[i])
            if math.isfinite(hi):
                rows.append(-row)
                rhs.append(x[i] - hi)
        G0, r0 = np.array(rows), np.array(rhs)
        unit = np.array([self.spec.unit_cost(n) for n in J])
        best = None
        for signs in itertools.product((1.0, -1.0), repeat=k):
            s = np.array(signs)
            G = np.vstack([G0, np.diag(s)])
            r = np.concatenate([r0, np.zeros(k)])
            found = _lp_vertices(G, r, unit * s)
            if found is not None and (best is None or found[0] < best[0]):
                best = found
        return best

    def solve(self, x_factual) -> Recourse | None:
        x = _instance(self.model, x_factual)
        if self.h.label(x[self.feature_index]) == self.h.favorable:
            raise PreconditionError("instance is already favorably classified")
        candidates = []
        for J in self.subsets:
            found = self._solve_subset(x, J)
            if found is None:
                continue
            _, delta = found
            action = Action(dict(zip(J, delta)))
            order = tuple(self.model.nodes.index(n) for n in J)
            candidates.append((cost(action, self.spec), len(J), order, float(delta @ delta), action))
        if not candidates:
            return None
        best_cost = min(c[0] for c in candidates)
        tied = [c for c in candidates if c[0] <= best_cost + _TIE_TOL * max(1.0, best_cost)]
        tied.sort(key=lambda c: c[1:4])
        c_best, _, _, _, action = tied[0]
        x_scf = self.model.counterfactual(x, action)
        self._check_sound(x, action, x_scf)
        return Recourse(action, c_best, x_scf)

    def _check_sound(self, x, action, x_scf):
        self.constraints.validate(action)
        label = self.h.label(x_scf[self.feature_index])
        if label != self.h.favorable:
            raise AssertionError(f"recourse {action.deltas} does not flip the decision")
        lo, hi = self.plaus[:, 0], self.plaus[:, 1]
        tol = _FEAS_TOL * (1.0 + np.abs(x_scf)) * 10
        if np.any(x_scf < lo - tol) or np.any(x_scf > hi + tol):
            raise AssertionError(f"recourse {action.deltas} leaves the plausible box")


def solve_mint(model: CausalModel, h: Classifier, x_factual, constraints: ConstraintSet,
               spec: CostSpec) -> Recourse | None:
    """Cheapest feasible, plausible action whose counterfactual flips ``h``.

    Returns ``None`` when no such action exists.  Raises
    :class:`PreconditionError` if ``x_factual`` is already favorable.
    """
    return MintSolver(model, h, constraints, spec).solve(x_factual)


def oracle_box(model: CausalModel, x: np.ndarray, constraints: ConstraintSet, node: str) -> tuple[float, float]:
    lo, hi = constraints.delta_box(node)
    plo, phi = constraints.plausible_range(node)
    xj = x[model.nodes.index(node)]
    lo, hi = max(lo, plo - xj), min(hi, phi - xj)
    return lo, hi


def brute_force_oracle(model: CausalModel, h: Classifier, x_factual, constraints: ConstraintSet,
                       spec: CostSpec, resolution: float = 1e-2, max_actionable: int = 3):
    """Exhaustive grid search over every intervention set and delta box.

    Each axis is sampled at ``resolution`` times its box width (plus the
    point 0 when it lies inside the box).  Every grid point is replayed
    through :func:`counterfactual` and the classifier.  Returns
    ``(Action, cost)`` for the cheapest flipping point, or ``None``.
    """
    x = _instance(model, x_factual)
    fidx = _feature_index(model, h)
    actionable = tuple(n for n in model.nodes if n in constraints.actionable)
    if len(actionable) > max_actionable:
        raise ValueError(f"oracle refuses {len(actionable)} actionable features (limit {max_actionable})")
    if h.label(x[fidx]) == h.favorable:
        raise PreconditionError("instance is already favorably classified")
    plaus = np.array([constraints.plausible_range(n) for n in model.nodes])
    n_steps = max(1, int(round(1.0 / resolution)))
    axes = {}
    for node in actionable:
        lo, hi = oracle_box(model, x, constraints, node)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError(f"oracle needs a bounded box for {node!r}")
        if lo > hi:
            axes[node] = np.array([])
            continue
        pts = np.linspace(lo, hi, n_steps + 1) if hi > lo else np.array([lo])
        if lo <= 0.0 <= hi:
            pts = np.union1d(pts, [0.0])
        axes[node] = pts
    best = None
    for J in _subsets(actionable):
        grids = np.meshgrid(*(axes[n] for n in J), indexing="ij")
        deltas = {n: g.ravel() for n, g in zip(J, grids)}
        if any(len(v) == 0 for v in deltas.values()):
            continue
        x_scf = model.counterfactual(x, deltas)
        flips = h.label(x_scf[:, fidx]) == h.favorable
        inside = np.all((x_scf >= plaus[:, 0]) & (x_scf <= plaus[:, 1]), axis=1)
        ok = flips & inside
        if not ok.any():
            continue
        costs = sum(spec.unit_cost(n) * np.abs(deltas[n]) for n in J)
        costs = np.where(ok, costs, np.inf)
        i = int(np.argmin(costs))
        if best is None or costs[i] < best[1] - _TIE_TOL * max(1.0, costs[i]):
            best = (Action({n: deltas[n][i] for n in J}), float(costs[i]))
    return best

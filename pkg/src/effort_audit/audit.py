"""Equality-of-effort audit: average minimal effort, ACR, RD and decisions.

Each individual's recourse cost does not depend on which neighborhood it is
viewed from, so :func:`run_audit` solves recourse once per unfavorably
classified row and then evaluates every (center, quantile) neighborhood by
masking that cost vector.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .data import Dataset
from .models import Classifier, fit_classifier
from .recourse import ConstraintSet, CostSpec, MintSolver
from .scm import CausalGraph, CausalModel, counterfactual, fit_causal_model
from .similarity import NORMS, membership_masks, instance_distance

PROTECTED, UNPROTECTED = "protected", "unprotected"
CENTER_GROUPS = (PROTECTED, UNPROTECTED)
DEFAULT_QUANTILES = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.40, 0.50, 0.60, 0.70, 0.80, 0.90, 1.00)
CURVE_METRICS = ("acr", "rd", "phi_pos", "phi_neg", "ratio_protected", "subset_size_pos", "subset_size_neg")
Z95 = 1.959963984540054


@dataclass(frozen=True)
class EffortSummary:
    """Average minimal effort (``phi``) and no-recourse ratio (``rho``) of one side."""

    group: str
    phi: float | None
    rho: float | None
    n_members: int
    n_unfavorable: int
    n_solvable: int

    @property
    def absent(self) -> bool:
        return self.n_unfavorable == 0


def summarize_costs(group: str, costs: np.ndarray, unfavorable: np.ndarray) -> EffortSummary:
    """Summary from per-member recourse costs (``nan`` = no recourse)."""
    costs = np.asarray(costs, dtype=float)
    unfavorable = np.asarray(unfavorable, dtype=bool)
    c = costs[unfavorable]
    solved = c[~np.isnan(c)]
    n_unfav = int(unfavorable.sum())
    phi = math.fsum(solved) / len(solved) if len(solved) else None
    rho = (n_unfav - len(solved)) / n_unfav if n_unfav else None
    return EffortSummary(group, phi, rho, len(costs), n_unfav, len(solved))


def effort_summary(members, model: CausalModel, h: Classifier, constraints: ConstraintSet,
                   spec: CostSpec, unfavorable_label: int | None = None, group: str = PROTECTED,
                   solver: MintSolver | None = None) -> EffortSummary:
    """Run recourse on every unfavorably classified member of one neighborhood side.

    ``members`` is a :class:`Dataset` or a matrix whose columns follow
    ``model.nodes``.
    """
    X = members.matrix(model.nodes) if isinstance(members, Dataset) else np.asarray(members, dtype=float)
    X = X.reshape(-1, len(model.nodes))
    unfavorable_label = h.unfavorable if unfavorable_label is None else unfavorable_label
    fidx = [model.nodes.index(f) for f in h.features]
    unfavorable = h.label(X[:, fidx]) == unfavorable_label if len(X) else np.zeros(0, bool)
    solver = solver or MintSolver(model, h, constraints, spec)
    costs = np.full(len(X), np.nan)
    for i in np.flatnonzero(unfavorable):
        found = solver.solve(X[i])
        if found is not None:
            costs[i] = found.cost
    return summarize_costs(group, costs, unfavorable)


def acr(pos: EffortSummary, neg: EffortSummary) -> tuple[float | None, str | None]:
    """``pos.phi / neg.phi`` with a reason code when the ratio is undefined."""
    if neg.phi is None:
        return None, f"no solvable {neg.group} neighbors"
    if pos.phi is None:
        return None, f"no solvable {pos.group} neighbors"
    if neg.phi <= 0:
        return None, f"zero effort among {neg.group} neighbors"
    if pos.phi <= 0:
        return None, f"zero effort among {pos.group} neighbors"
    return pos.phi / neg.phi, None


def recourse_discrepancy(pos: EffortSummary, neg: EffortSummary) -> float:
    """``rho(neg) - rho(pos)``; a side without unfavorable members counts as 0."""
    return (neg.rho or 0.0) - (pos.rho or 0.0)


def decide(acr_value: float | None, rd_value: float, tau: float, epsilon: float) -> bool | None:
    """Equality-of-effort decision; ``None`` means indeterminate (ratio undefined)."""
    if not (tau > 0 and epsilon > 0):
        raise ValueError("thresholds must be positive")
    if abs(rd_value) >= epsilon:
        return False
    if acr_value is None:
        return None
    return abs(acr_value) <= tau


def counterfactual_twins(dataset: Dataset, model: CausalModel, s_values: Sequence[float] | None = None) -> np.ndarray:
    """Every row with its sensitive value swapped and the change propagated."""
    s_name = dataset.sensitive
    if not model.graph.is_root(s_name):
        raise ValueError(f"sensitive attribute {s_name!r} must be a root of the graph")
    s0, s1 = s_values if s_values is not None else (dataset.protected_value, dataset.unprotected_value)
    X = dataset.matrix(model.nodes)
    s = X[:, model.nodes.index(s_name)]
    if not np.all((s == s0) | (s == s1)):
        raise ValueError("sensitive attribute takes values outside s_values")
    flipped = np.where(s == s0, s1, s0)
    return counterfactual(model, X, {s_name: flipped - s})


def cf_unfair_mask(dataset: Dataset, model: CausalModel, h: Classifier, s_values=None) -> np.ndarray:
    """Rows whose unfavorable decision is reversed by flipping the sensitive attribute."""
    fidx = [model.nodes.index(f) for f in h.features]
    X = dataset.matrix(model.nodes)
    twins = counterfactual_twins(dataset, model, s_values)
    return (h.label(X[:, fidx]) == h.unfavorable) & (h.label(twins[:, fidx]) == h.favorable)


def counterfactual_fairness_ratio(dataset: Dataset, model: CausalModel, h: Classifier, s_values=None) -> float:
    """Share of individuals who are not counterfactually unfairly treated."""
    return 1.0 - float(cf_unfair_mask(dataset, model, h, s_values).mean())


@dataclass(frozen=True)
class BoxStats:
    n: int
    mean: float
    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: tuple[float, ...]

    @classmethod
    def of(cls, values) -> "BoxStats | None":
        v = np.sort(np.asarray(values, dtype=float))
        if len(v) == 0:
            return None
        q1, med, q3 = np.percentile(v, [25, 50, 75])
        iqr = q3 - q1
        inside = v[(v >= q1 - 1.5 * iqr) & (v <= q3 + 1.5 * iqr)]
        return cls(
            n=len(v),
            mean=math.fsum(v) / len(v),
            q1=float(q1),
            median=float(med),
            q3=float(q3),
            whisker_low=float(inside.min()),
            whisker_high=float(inside.max()),
            outliers=tuple(float(o) for o in v[(v < inside.min()) | (v > inside.max())]),
        )


def recourse_costs(dataset: Dataset, model: CausalModel, h: Classifier, constraints: ConstraintSet,
                   spec: CostSpec) -> tuple[np.ndarray, np.ndarray]:
    """Per-row recourse cost (``nan`` when absent or not needed) and the unfavorable mask."""
    solver = MintSolver(model, h, constraints, spec)
    X = dataset.matrix(model.nodes)
    unfavorable = h.label(X[:, solver.feature_index]) == h.unfavorable
    costs = np.full(len(X), np.nan)
    for i in np.flatnonzero(unfavorable):
        found = solver.solve(X[i])
        if found is not None:
            costs[i] = found.cost
    return costs, unfavorable


def cost_by_cf_group(dataset: Dataset, model: CausalModel, h: Classifier, constraints: ConstraintSet,
                     spec: CostSpec, costs: np.ndarray | None = None) -> dict[str, BoxStats | None]:
    """Recourse cost distributions of counterfactually fair vs unfair individuals."""
    if costs is None:
        costs, _ = recourse_costs(dataset, model, h, constraints, spec)
    unfair = cf_unfair_mask(dataset, model, h)
    solved = ~np.isnan(costs)
    return {
        "cf_fair": BoxStats.of(costs[solved & ~unfair]),
        "cf_unfair": BoxStats.of(costs[solved & unfair]),
    }


@dataclass(frozen=True)
class AuditConfig:
    """Library-level settings of one audit (the CLI builds this from its config file)."""

    classifier_features: tuple[str, ...]
    actionability: Mapping[str, str]
    direction: Mapping[str, str] = field(default_factory=dict)
    delta_bounds: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    plausibility: str | Mapping[str, tuple[float, float]] = "observed"
    cost_weights: Mapping[str, float] = field(default_factory=dict)
    quantiles: tuple[float, ...] = DEFAULT_QUANTILES
    tau: float = 1.2
    epsilon: float = 0.05
    norm: str = "l1"
    distance_features: tuple[str, ...] | None = None
    l2: float = 1e-6

    def __post_init__(self):
        qs = tuple(float(q) for q in self.quantiles)
        if not qs or any(not 0 < q <= 1 for q in qs) or any(b <= a for a, b in zip(qs, qs[1:])):
            raise ValueError("quantiles must be strictly increasing in (0, 1]")
        if self.norm not in NORMS:
            raise ValueError(f"norm must be one of {NORMS}")
        if not (self.tau > 0 and self.epsilon > 0):
            raise ValueError("tau and epsilon must be positive")
        object.__setattr__(self, "quantiles", qs)
        object.__setattr__(self, "classifier_features", tuple(self.classifier_features))

    def constraints_for(self, dataset: Dataset, nodes: Sequence[str]) -> ConstraintSet:
        if self.plausibility == "observed":
            bounds = dataset.observed_bounds()
            plaus = {n: bounds[n] for n in nodes}
        elif self.plausibility == "unbounded":
            plaus = {}
        else:
            plaus = dict(self.plausibility)
        return ConstraintSet(
            actionability=dict(self.actionability),
            direction=dict(self.direction),
            delta_bounds=dict(self.delta_bounds),
            plausibility=plaus,
            sensitive=dataset.sensitive,
        )

    def cost_spec(self, dataset: Dataset) -> CostSpec:
        ranges = dataset.ranges()
        actionable = [n for n, c in self.actionability.items() if c == "actionable"]
        return CostSpec({n: ranges[n] for n in actionable}, dict(self.cost_weights))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["delta_bounds"] = {k: list(v) for k, v in self.delta_bounds.items()}
        if not isinstance(self.plausibility, str):
            d["plausibility"] = {k: list(v) for k, v in self.plausibility.items()}
        return d


@dataclass(frozen=True)
class CenterRecord:
    seed: int | None
    center: int
    center_group: str
    quantile: float
    subset_size_pos: int
    subset_size_neg: int
    n_unfavorable_pos: int
    n_unfavorable_neg: int
    phi_pos: float | None
    phi_neg: float | None
    rho_pos: float | None
    rho_neg: float | None
    acr: float | None
    acr_reason: str | None
    rd: float
    ratio_protected: float
    decision: bool | None

    def metric(self, name: str):
        return getattr(self, name)


@dataclass(frozen=True)
class CurvePoint:
    center_group: str
    quantile: float
    metric: str
    mean: float | None
    ci_low: float | None
    ci_high: float | None
    n: int
    n_absent: int


def mean_ci(values: Sequence[float]) -> tuple[float, float, float]:
    """Mean and normal-approximation 95% band; exact summation keeps it order independent."""
    v = sorted(values)
    n = len(v)
    mean = math.fsum(v) / n
    if n < 2:
        return mean, mean, mean
    sd = math.sqrt(math.fsum((x - mean) ** 2 for x in v) / (n - 1))
    half = Z95 * sd / math.sqrt(n)
    return mean, mean - half, mean + half


def aggregate(records: Sequence[CenterRecord], quantiles: Sequence[float],
              metrics: Sequence[str] = CURVE_METRICS) -> list[CurvePoint]:
    """Across-center mean and 95% band per (center group, quantile, metric)."""
    out = []
    for group in CENTER_GROUPS:
        for q in quantiles:
            rows = [r for r in records if r.center_group == group and r.quantile == q]
            for metric in metrics:
                vals = [r.metric(metric) for r in rows]
                present = [float(v) for v in vals if v is not None]
                if present:
                    m, lo, hi = mean_ci(present)
                else:
                    m = lo = hi = None
                out.append(CurvePoint(group, q, metric, m, lo, hi, len(present), len(vals) - len(present)))
    return out


@dataclass
class RunResult:
    """Everything computed for one dataset (one seed)."""

    seed: int | None
    dataset_digest: str
    provenance: dict
    scm: dict
    classifier: dict
    distance_schema: dict
    n_rows: int
    n_unfavorable: int
    n_no_recourse: int
    n_recourse_verified: int
    records: list[CenterRecord]
    system: dict
    cfr: float
    cost_by_cf_group: dict


@dataclass
class AuditReport:
    config: dict
    runs: list[RunResult]
    curves: list[CurvePoint]
    system: dict

    def curve(self, group: str, metric: str) -> dict[float, CurvePoint]:
        return {p.quantile: p for p in self.curves if p.center_group == group and p.metric == metric}

    @property
    def records(self) -> list[CenterRecord]:
        return [r for run in self.runs for r in run.records]

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "system": self.system,
            "curves": [asdict(p) for p in self.curves],
            "runs": [asdict(r) for r in self.runs],
        }


def _record(seed, center, group, q, pos: EffortSummary, neg: EffortSummary, tau, eps) -> CenterRecord:
    # the ratio is always "own group over the other group"
    own, other = (pos, neg) if group == PROTECTED else (neg, pos)
    ratio, reason = acr(own, other)
    rd = recourse_discrepancy(own, other)
    size = pos.n_members + neg.n_members
    return CenterRecord(
        seed=seed, center=int(center), center_group=group, quantile=q,
        subset_size_pos=pos.n_members, subset_size_neg=neg.n_members,
        n_unfavorable_pos=pos.n_unfavorable, n_unfavorable_neg=neg.n_unfavorable,
        phi_pos=pos.phi, phi_neg=neg.phi, rho_pos=pos.rho, rho_neg=neg.rho,
        acr=ratio, acr_reason=reason, rd=rd,
        ratio_protected=pos.n_members / size if size else 0.0,
        decision=decide(ratio, rd, tau, eps),
    )


def system_summary(records: Sequence[CenterRecord]) -> dict:
    """System-level (q = 1) ACR, RD and decision per center group."""
    out = {}
    for group in CENTER_GROUPS:
        rows = [r for r in records if r.center_group == group and r.quantile == 1.0]
        acrs = [r.acr for r in rows if r.acr is not None]
        out[group] = {
            "n_centers": len(rows),
            "acr": math.fsum(acrs) / len(acrs) if acrs else None,
            "rd": math.fsum(r.rd for r in rows) / len(rows) if rows else None,
            "decisions": sorted({str(r.decision) for r in rows}),
        }
    return out


def run_audit(dataset: Dataset, graph: CausalGraph, config: AuditConfig, seed: int | None = None) -> AuditReport:
    """Fit the SCM and classifier, then audit every unfavorably classified center."""
    model = fit_causal_model(dataset, graph)
    h = fit_classifier(dataset, config.classifier_features, l2=config.l2)
    constraints = config.constraints_for(dataset, model.nodes)
    spec = config.cost_spec(dataset)
    run = audit_fitted(dataset, model, h, constraints, spec, config, seed)
    return AuditReport(config.to_dict(), [run], aggregate(run.records, config.quantiles), system_summary(run.records))


def audit_fitted(dataset: Dataset, model: CausalModel, h: Classifier, constraints: ConstraintSet,
                 spec: CostSpec, config: AuditConfig, seed: int | None = None) -> RunResult:
    costs, unfavorable = recourse_costs(dataset, model, h, constraints, spec)
    schema = dataset.schema(config.distance_features)
    D = dataset.matrix(schema.names)
    protected = dataset.protected_mask()
    qs = config.quantiles
    partial = [q for q in qs if q < 1.0]

    def sides(mask):
        return (summarize_costs(PROTECTED, costs[mask & protected], unfavorable[mask & protected]),
                summarize_costs(UNPROTECTED, costs[mask & ~protected], unfavorable[mask & ~protected]))

    whole = sides(np.ones(len(dataset), bool)) if 1.0 in qs else None
    records = []
    for center in np.flatnonzero(unfavorable):
        group = PROTECTED if protected[center] else UNPROTECTED
        dist = instance_distance(D, D[center], schema, config.norm)
        for q, mask in zip(partial, membership_masks(dist, partial)):
            records.append(_record(seed, center, group, q, *sides(mask), config.tau, config.epsilon))
        if whole is not None:
            records.append(_record(seed, center, group, 1.0, *whole, config.tau, config.epsilon))
    records.sort(key=lambda r: (CENTER_GROUPS.index(r.center_group), r.center, r.quantile))
    cf = cost_by_cf_group(dataset, model, h, constraints, spec, costs)
    n_solved = int((~np.isnan(costs)).sum())
    return RunResult(
        seed=seed,
        dataset_digest=dataset.digest(),
        provenance=dict(dataset.provenance),
        scm=model.to_dict(),
        classifier=h.to_dict(),
        distance_schema={**schema.to_dict(), "norm": config.norm},
        n_rows=len(dataset),
        n_unfavorable=int(unfavorable.sum()),
        n_no_recourse=int(unfavorable.sum()) - n_solved,
        n_recourse_verified=n_solved,
        records=records,
        system=system_summary(records),
        cfr=counterfactual_fairness_ratio(dataset, model, h),
        cost_by_cf_group={k: (asdict(v) if v else None) for k, v in cf.items()},
    )


def merge_reports(reports: Sequence[AuditReport]) -> AuditReport:
    """Pool several runs (e.g. seeds) into one report; every center weighs equally."""
    runs = [run for rep in reports for run in rep.runs]
    records = [r for run in runs for r in run.records]
    config = reports[0].config
    return AuditReport(config, runs, aggregate(records, config["quantiles"]), system_summary(records))

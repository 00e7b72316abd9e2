"""Configured experiments: audits over seeds, the alpha sweep and the CF comparison."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .audit import (
    PROTECTED, UNPROTECTED, AuditReport, cost_by_cf_group, counterfactual_fairness_ratio, mean_ci,
    merge_reports, recourse_costs, run_audit,
)
from .config import RunConfig
from .models import fit_classifier
from .scm import fit_causal_model


def run_configured_audit(cfg: RunConfig, alpha: float | None = None) -> AuditReport:
    """One audit per seed, pooled into a single report."""
    audit_cfg = cfg.audit_config()
    graph = cfg.causal_graph(alpha)
    reports = []
    for seed in cfg.seeds:
        dataset = cfg.dataset(seed, alpha)
        cfg.validate_against(dataset, graph)
        reports.append(run_audit(dataset, graph, audit_cfg, seed=seed))
    merged = merge_reports(reports)
    merged.config = {**merged.config, "run": cfg.to_dict(), "graph": graph.to_dict()}
    if alpha is not None:
        merged.config["run"]["alpha"] = alpha
    return merged


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    metric: str
    mean: float | None
    ci_low: float | None
    ci_high: float | None
    n: int


SWEEP_METRICS = (
    "acr_system_protected", "acr_system_unprotected",
    "acr_individual_protected", "acr_individual_unprotected",
    "ratio_protected_individual", "cfr",
)


def _row(alpha, metric, values) -> SweepRow:
    values = [v for v in values if v is not None]
    if not values:
        return SweepRow(alpha, metric, None, None, None, 0)
    m, lo, hi = mean_ci(values)
    return SweepRow(alpha, metric, m, lo, hi, len(values))


def run_sweep(cfg: RunConfig) -> tuple[list[SweepRow], list[AuditReport]]:
    """System-level ACR, individual-level ACR and CFR for every configured alpha.

    ACR bands pool every (seed, center) record; the CFR band is across seeds.
    """
    if cfg.experiment != "synthetic":
        raise ValueError("the alpha sweep needs the synthetic experiment")
    if not cfg.alphas:
        raise ValueError("alpha list is empty")
    rows, reports = [], []
    q_ind = cfg.individual_quantile
    for alpha in cfg.alphas:
        rep = run_configured_audit(cfg, alpha)
        reports.append(rep)
        recs = rep.records
        for group in (PROTECTED, UNPROTECTED):
            rows.append(_row(alpha, f"acr_system_{group}",
                             [r.acr for r in recs if r.center_group == group and r.quantile == 1.0]))
        for group in (PROTECTED, UNPROTECTED):
            rows.append(_row(alpha, f"acr_individual_{group}",
                             [r.acr for r in recs if r.center_group == group and r.quantile == q_ind]))
        rows.append(_row(alpha, "ratio_protected_individual",
                         [r.ratio_protected for r in recs if r.center_group == PROTECTED and r.quantile == q_ind]))
        rows.append(_row(alpha, "cfr", [run.cfr for run in rep.runs]))
    return rows, reports


def run_cf_compare(cfg: RunConfig) -> dict:
    """Counterfactual fairness ratio and recourse cost boxplots per seed."""
    graph = cfg.causal_graph()
    audit_cfg = cfg.audit_config()
    runs = []
    for seed in cfg.seeds:
        dataset = cfg.dataset(seed)
        cfg.validate_against(dataset, graph)
        model = fit_causal_model(dataset, graph)
        h = fit_classifier(dataset, audit_cfg.classifier_features, l2=audit_cfg.l2)
        constraints = audit_cfg.constraints_for(dataset, model.nodes)
        spec = audit_cfg.cost_spec(dataset)
        costs, _ = recourse_costs(dataset, model, h, constraints, spec)
        boxes = cost_by_cf_group(dataset, model, h, constraints, spec, costs)
        runs.append({
            "seed": seed,
            "cfr": counterfactual_fairness_ratio(dataset, model, h),
            "boxes": {k: (asdict(v) if v else None) for k, v in boxes.items()},
        })
    cfrs = [r["cfr"] for r in runs]
    return {
        "experiment": cfg.experiment,
        "alpha": cfg.alpha if cfg.experiment == "synthetic" else None,
        "cfr": math.fsum(cfrs) / len(cfrs),
        "runs": runs,
    }

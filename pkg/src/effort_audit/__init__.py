"""Equality-of-effort fairness audits through recourse on structural causal models."""
from .audit import (
    AuditConfig, AuditReport, EffortSummary, acr, cost_by_cf_group, counterfactual_fairness_ratio,
    decide, effort_summary, recourse_discrepancy, run_audit,
)
from .data import Dataset, generate_synthetic, load_german_credit, split_by_sensitive
from .models import Classifier, fit_classifier, predict
from .recourse import Action, ConstraintSet, CostSpec, brute_force_oracle, cost, solve_mint
from .scm import CausalGraph, CausalModel, abduct, counterfactual, fit_causal_model, reconstruct
from .similarity import FeatureSchema, build_neighborhood, feature_distance, instance_distance

__version__ = "0.1.0"

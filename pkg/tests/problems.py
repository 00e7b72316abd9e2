"""Random desk-scale recourse problems shared by the solver tests."""
import numpy as np

from effort_audit.models import Classifier
from effort_audit.recourse import ConstraintSet, CostSpec
from effort_audit.scm import CausalGraph, CausalModel, LinearEquation


def random_problem(rng: np.random.Generator, n_actionable: int):
    """Linear SCM with a sensitive root, actionable nodes and one mutable node.

    Returns ``(model, h, x, constraints, spec)`` with ``x`` unfavorably classified.
    """
    act = [f"a{i}" for i in range(n_actionable)]
    nodes = ["s"] + act + ["m"]
    parents, eqs = {}, {}
    for i, node in enumerate(nodes):
        pool = nodes[:i]
        pas = tuple(p for p in pool if rng.random() < 0.5) if node != "s" else ()
        parents[node] = pas
        if pas:
            eqs[node] = LinearEquation(node, pas, rng.normal(0, 1, len(pas)), float(rng.normal()))
    model = CausalModel(CausalGraph(parents), eqs)

    feats = tuple(nodes[1:]) if rng.random() < 0.7 else tuple(nodes)
    k = len(feats)
    h0 = Classifier(feats, rng.normal(0, 1.5, k), 0.0, rng.normal(0, 1, k), rng.uniform(0.5, 2, k))
    x = rng.normal(0, 1, len(nodes))
    x[0] = float(rng.integers(0, 2))
    fidx = [nodes.index(f) for f in feats]
    target = -rng.uniform(0.05, 3.0)
    h = Classifier(feats, h0.weights, float(target - h0.logit(x[fidx])), h0.mean, h0.scale)

    direction, bounds = {}, {}
    for a in act:
        lo, hi = -rng.uniform(0.2, 3.0), rng.uniform(0.2, 3.0)
        bounds[a] = (lo, hi)
        u = rng.random()
        if u < 0.2:
            direction[a] = "increase"
        elif u < 0.3:
            direction[a] = "decrease"
    plaus = {}
    if rng.random() < 0.5:
        j = nodes.index("m")
        plaus["m"] = (x[j] - rng.uniform(0.2, 3.0), x[j] + rng.uniform(0.2, 3.0))
    constraints = ConstraintSet(
        actionability={"s": "immutable", **{a: "actionable" for a in act}, "m": "mutable"},
        direction=direction, delta_bounds=bounds, plausibility=plaus, sensitive="s",
    )
    spec = CostSpec({a: float(rng.uniform(0.5, 5.0)) for a in act})
    return model, h, x, constraints, spec


def grid_step_cost(model, x, constraints, spec, resolution):
    """Cost of moving one oracle grid step along every actionable axis."""
    from effort_audit.recourse import oracle_box

    total = 0.0
    for a in constraints.actionable:
        lo, hi = oracle_box(model, x, constraints, a)
        if hi > lo:
            total += spec.unit_cost(a) * (hi - lo) * resolution
    return total

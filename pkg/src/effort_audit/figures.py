"""Optional PNG rendering of the CSV artifacts (needs the ``plot`` extra)."""
from __future__ import annotations

from pathlib import Path

GROUP_STYLE = {
    "protected": dict(color="magenta", linestyle="--", label="protected centers"),
    "unprotected": dict(color="blue", linestyle=":", label="unprotected centers"),
}
YLABELS = {
    "acr": "ACR",
    "ratio_protected": "share of protected neighbors",
    "rd": "RD",
}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _band(ax, points, style):
    pts = sorted((p for p in points if p.mean is not None), key=lambda p: p.quantile)
    if not pts:
        return
    q = [p.quantile for p in pts]
    ax.fill_between(q, [p.ci_low for p in pts], [p.ci_high for p in pts], color=style["color"], alpha=0.1)
    ax.plot(q, [p.mean for p in pts], linewidth=2, **style)


def plot_metric(curves, metric: str, path) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for group, style in GROUP_STYLE.items():
        _band(ax, [p for p in curves if p.metric == metric and p.center_group == group], style)
    if metric == "acr":
        ax.axhline(1.0, color="gray", linewidth=0.8)
    ax.set_xlabel("quantile on distance")
    ax.set_ylabel(YLABELS.get(metric, metric))
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_costs(curves, group: str, path) -> Path:
    """Average effort of I+ and I- around centers of one group."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for metric, color, label in (("phi_pos", "magenta", "I+ (protected)"), ("phi_neg", "blue", "I- (unprotected)")):
        pts = [p for p in curves if p.metric == metric and p.center_group == group]
        _band(ax, pts, dict(color=color, linestyle="-", label=label))
    ax.set_xlabel("quantile on distance")
    ax.set_ylabel("average recourse cost")
    ax.set_title(f"{group} centers")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_sweep(rows, path) -> Path:
    plt = _pyplot()
    fig, (left, right) = plt.subplots(1, 2, figsize=(9, 3.5))
    for metric, ax in (("acr_system_protected", left), ("acr_individual_protected", left), ("cfr", right)):
        pts = sorted((r for r in rows if r.metric == metric and r.mean is not None), key=lambda r: r.alpha)
        a = [r.alpha for r in pts]
        ax.fill_between(a, [r.ci_low for r in pts], [r.ci_high for r in pts], alpha=0.15)
        ax.plot(a, [r.mean for r in pts], marker="o", label=metric)
    left.set_ylabel("ACR (protected centers)")
    right.set_ylabel("counterfactual fairness ratio")
    for ax in (left, right):
        ax.set_xlabel("alpha")
        ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_cf_boxes(result: dict, path) -> Path:
    """Boxplots from precomputed statistics of the first seed."""
    plt = _pyplot()
    run = result["runs"][0]
    stats, labels = [], []
    for group, label in (("cf_fair", "CF"), ("cf_unfair", "no CF")):
        box = run["boxes"].get(group)
        if box is None:
            continue
        stats.append({"med": box["median"], "q1": box["q1"], "q3": box["q3"], "whislo": box["whisker_low"],
                      "whishi": box["whisker_high"], "fliers": list(box["outliers"]), "label": label})
    fig, ax = plt.subplots(figsize=(4, 3.5))
    if stats:
        ax.bxp(stats)
    ax.set_ylabel("cost of recourse")
    ax.set_title(f"CFR = {result['cfr']:.3f}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def render_audit(curves, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    paths = [plot_metric(curves, m, out_dir / f"{m}.png") for m in ("acr", "ratio_protected")]
    paths += [plot_costs(curves, g, out_dir / f"costs_{g}.png") for g in GROUP_STYLE]
    return paths

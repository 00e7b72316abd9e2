"""YAML run configuration for the command-line front end."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import yaml

from .audit import DEFAULT_QUANTILES, AuditConfig
from .data import GERMAN_GRAPH, Dataset, generate_synthetic, load_german_credit, synthetic_graph
from .exceptions import ConfigError
from .recourse import ACTIONABILITY, DIRECTIONS
from .scm import CausalGraph
from .similarity import NORMS

EXPERIMENTS = ("synthetic", "german")
_KNOWN_KEYS = {
    "experiment", "data", "synthetic", "alphas", "seeds", "graph", "classifier", "constraints",
    "plausibility", "cost_weights", "quantiles", "tau", "epsilon", "norm", "distance_features",
    "individual_quantile",
}


@dataclass
class RunConfig:
    experiment: str
    graph: dict[str, list[str]] | None
    classifier_features: list[str]
    actionability: dict[str, str]
    direction: dict[str, str]
    delta_bounds: dict[str, tuple[float, float]]
    plausibility: Any = "observed"
    cost_weights: dict[str, float] = field(default_factory=dict)
    quantiles: tuple[float, ...] = DEFAULT_QUANTILES
    tau: float = 1.2
    epsilon: float = 0.05
    norm: str = "l1"
    distance_features: list[str] | None = None
    l2: float = 1e-6
    n: int = 1000
    alpha: float = 2.0
    alphas: list[float] = field(default_factory=list)
    seeds: list[int] = field(default_factory=lambda: [0])
    data_path: Path | None = None
    data_format: str = "uci"
    individual_quantile: float = 0.2
    source: Path | None = None

    def audit_config(self) -> AuditConfig:
        return AuditConfig(
            classifier_features=tuple(self.classifier_features),
            actionability=self.actionability,
            direction=self.direction,
            delta_bounds=self.delta_bounds,
            plausibility=self.plausibility,
            cost_weights=self.cost_weights,
            quantiles=self.quantiles,
            tau=self.tau,
            epsilon=self.epsilon,
            norm=self.norm,
            distance_features=tuple(self.distance_features) if self.distance_features else None,
            l2=self.l2,
        )

    def causal_graph(self, alpha: float | None = None) -> CausalGraph:
        if self.graph is not None:
            return CausalGraph.from_adjacency(self.graph)
        if self.experiment == "synthetic":
            return synthetic_graph(self.alpha if alpha is None else alpha)
        return GERMAN_GRAPH

    def dataset(self, seed: int = 0, alpha: float | None = None) -> Dataset:
        if self.experiment == "synthetic":
            return generate_synthetic(self.n, self.alpha if alpha is None else alpha, seed)
        return load_german_credit(self.data_path, self.data_format)

    def validate_against(self, dataset: Dataset, graph: CausalGraph) -> None:
        nodes = set(graph.nodes)
        for name, mapping in (("constraints", self.actionability), ("classifier", self.classifier_features)):
            unknown = set(mapping) - nodes
            if unknown:
                raise ConfigError(f"{name} mention unknown node(s) {sorted(unknown)}")
        missing = nodes - set(dataset.columns)
        if missing:
            raise ConfigError(f"graph nodes {sorted(missing)} are not dataset columns")
        if self.actionability.get(dataset.sensitive) == "actionable":
            raise ConfigError(f"sensitive attribute {dataset.sensitive!r} cannot be actionable")

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "source": str(self.source) if self.source else None,
            "seeds": list(self.seeds),
            "alpha": self.alpha,
            "alphas": list(self.alphas),
            "n": self.n,
            "data_path": str(self.data_path) if self.data_path else None,
            "data_format": self.data_format,
            "individual_quantile": self.individual_quantile,
        }


def _key_lines(text: str) -> dict[str, int]:
    try:
        node = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    if not isinstance(node, yaml.MappingNode):
        return {}
    return {k.value: k.start_mark.line + 1 for k, _ in node.value}


def _fail(message: str, key: str, lines: dict[str, int]) -> ConfigError:
    where = f"line {lines[key]}: " if key in lines else ""
    return ConfigError(f"{where}{key}: {message}")


def _float_pair(value, what):
    lo, hi = value
    lo = -math.inf if lo is None else float(lo)
    hi = math.inf if hi is None else float(hi)
    return lo, hi


def parse_config(text: str, source: Path | None = None) -> RunConfig:
    """Parse and validate a YAML configuration document."""
    try:
        raw = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        line = f"line {mark.line + 1}, column {mark.column + 1}: " if mark else ""
        raise ConfigError(f"{line}{exc.problem}") from None
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    lines = _key_lines(text)
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise _fail("unknown key", key, lines)

    experiment = raw.get("experiment")
    if experiment not in EXPERIMENTS:
        raise _fail(f"must be one of {EXPERIMENTS}", "experiment", lines)

    graph = raw.get("graph")
    if graph is not None:
        if not isinstance(graph, dict):
            raise _fail("must map node names to parent lists", "graph", lines)
        graph = {str(k): [str(p) for p in (v or [])] for k, v in graph.items()}
        try:
            CausalGraph.from_adjacency(graph)
        except ValueError as exc:
            raise _fail(str(exc), "graph", lines) from None

    actionability, direction, delta_bounds = {}, {}, {}
    for node, spec in (raw.get("constraints") or {}).items():
        if isinstance(spec, str):
            spec = {"class": spec}
        if not isinstance(spec, dict):
            raise _fail(f"entry for {node!r} must be a class name or mapping", "constraints", lines)
        cls = spec.get("class", "mutable")
        if cls not in ACTIONABILITY:
            raise _fail(f"{node}: class must be one of {ACTIONABILITY}", "constraints", lines)
        actionability[str(node)] = cls
        if "direction" in spec:
            if spec["direction"] not in DIRECTIONS:
                raise _fail(f"{node}: direction must be one of {DIRECTIONS}", "constraints", lines)
            direction[str(node)] = spec["direction"]
        if "delta_bounds" in spec:
            delta_bounds[str(node)] = _float_pair(spec["delta_bounds"], node)
    if not any(c == "actionable" for c in actionability.values()):
        raise _fail("at least one node must be actionable", "constraints", lines)

    plaus = raw.get("plausibility", "observed")
    if isinstance(plaus, dict):
        plaus = {str(k): _float_pair(v, k) for k, v in plaus.items()}
    elif plaus not in ("observed", "unbounded"):
        raise _fail("must be 'observed', 'unbounded' or a mapping of bounds", "plausibility", lines)

    quantiles = tuple(float(q) for q in raw.get("quantiles", DEFAULT_QUANTILES))
    if not quantiles or any(not 0 < q <= 1 for q in quantiles) or any(
            b <= a for a, b in zip(quantiles, quantiles[1:])):
        raise _fail("must be strictly increasing values in (0, 1]", "quantiles", lines)

    norm = raw.get("norm", "l1")
    if norm not in NORMS:
        raise _fail(f"must be one of {NORMS}", "norm", lines)
    for key in ("tau", "epsilon"):
        if key in raw and not (isinstance(raw[key], (int, float)) and raw[key] > 0):
            raise _fail("must be a positive number", key, lines)

    classifier = raw.get("classifier") or {}
    features = classifier.get("features")
    if not features:
        raise _fail("classifier.features is required", "classifier", lines)

    synthetic = raw.get("synthetic") or {}
    alphas = raw.get("alphas", [])
    if "alphas" in raw and not alphas:
        raise _fail("alpha list must not be empty", "alphas", lines)
    seeds = raw.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
        raise _fail("must be a non-empty list of integers", "seeds", lines)

    data = raw.get("data") or {}
    data_path = None
    if data.get("path"):
        data_path = Path(data["path"])
        if not data_path.is_absolute() and source is not None:
            data_path = source.parent / data_path

    cfg = RunConfig(
        experiment=experiment,
        graph=graph,
        classifier_features=[str(f) for f in features],
        actionability=actionability,
        direction=direction,
        delta_bounds=delta_bounds,
        plausibility=plaus,
        cost_weights={str(k): float(v) for k, v in (raw.get("cost_weights") or {}).items()},
        quantiles=quantiles,
        tau=float(raw.get("tau", 1.2)),
        epsilon=float(raw.get("epsilon", 0.05)),
        norm=norm,
        distance_features=raw.get("distance_features"),
        l2=float(classifier.get("l2", 1e-6)),
        n=int(synthetic.get("n", 1000)),
        alpha=float(synthetic.get("alpha", 2.0)),
        alphas=[float(a) for a in alphas],
        seeds=seeds,
        data_path=data_path,
        data_format=data.get("format", "uci"),
        individual_quantile=float(raw.get("individual_quantile", 0.2)),
        source=source,
    )
    if cfg.individual_quantile not in cfg.quantiles:
        raise _fail("must be one of the configured quantiles", "individual_quantile", lines)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path.resolve())


def with_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    clean = {k: v for k, v in overrides.items() if v is not None}
    if "quantiles" in clean:
        qs = tuple(clean["quantiles"])
        if any(not 0 < q <= 1 for q in qs) or any(b <= a for a, b in zip(qs, qs[1:])):
            raise ConfigError("--quantiles must be strictly increasing values in (0, 1]")
        clean["quantiles"] = qs
        if cfg.individual_quantile not in qs:
            clean["individual_quantile"] = min(qs, key=lambda q: abs(q - cfg.individual_quantile))
    if "alphas" in clean and not clean["alphas"]:
        raise ConfigError("--alpha list must not be empty")
    return replace(cfg, **clean)

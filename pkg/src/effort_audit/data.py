"""Datasets: the synthetic generator and the German credit loader."""
from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .exceptions import IngestionError, SchemaError
from .scm import CausalGraph
from .similarity import FEATURE_KINDS, FeatureSchema

SYNTHETIC_COLUMNS = ("x1", "x2", "x3")
GERMAN_COLUMNS = ("sex", "age", "amount", "duration")

# 0-based column positions in the UCI german.data layout
_UCI_FIELDS = {"duration": 1, "amount": 4, "status_sex": 8, "age": 12, "risk": 20}
_UCI_WIDTH = 21
_UCI_ROWS = 1000


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable table of covariates plus a binary outcome.

    ``values`` holds every covariate (the sensitive attribute included) as
    floats, one column per entry of ``columns``; categorical covariates are
    stored as numeric codes.
    """

    columns: tuple[str, ...]
    values: np.ndarray
    outcome: np.ndarray
    sensitive: str
    kinds: Mapping[str, str]
    protected_value: float = 0.0
    favorable: int = 1
    provenance: Mapping = field(default_factory=dict)
    seed: int | None = None
    # subsets such as D+ / D- legitimately hold one group
    partial: bool = field(default=False, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        outcome = np.array(self.outcome, dtype=int)
        columns = tuple(self.columns)
        if values.ndim != 2 or values.shape[1] != len(columns):
            raise SchemaError(f"values shape {values.shape} does not match {len(columns)} columns")
        if outcome.shape != (values.shape[0],):
            raise SchemaError("outcome length differs from the number of rows")
        if self.sensitive not in columns:
            raise SchemaError(f"sensitive column {self.sensitive!r} missing")
        if not np.all(np.isfinite(values)):
            raise SchemaError("dataset contains missing or non-finite values")
        if not set(np.unique(outcome)) <= {0, 1}:
            raise SchemaError("outcome must be binary 0/1")
        s_values = set(np.unique(values[:, columns.index(self.sensitive)]))
        if self.partial:
            if len(s_values) > 2:
                raise SchemaError(f"sensitive column {self.sensitive!r} must be binary, found {sorted(s_values)}")
        elif len(s_values) != 2 or self.protected_value not in s_values:
            raise SchemaError(
                f"sensitive column {self.sensitive!r} must be binary with both groups present, "
                f"found values {sorted(s_values)}"
            )
        kinds = {c: self.kinds.get(c, "continuous") for c in columns}
        for c, k in kinds.items():
            if k not in FEATURE_KINDS:
                raise SchemaError(f"unknown feature kind {k!r} for {c!r}")
        values.setflags(write=False)
        outcome.setflags(write=False)
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "outcome", outcome)
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "protected_value", float(self.protected_value))

    def __len__(self):
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return len(self)

    @property
    def covariates(self) -> tuple[str, ...]:
        return tuple(c for c in self.columns if c != self.sensitive)

    @property
    def unprotected_value(self) -> float:
        s = self.column(self.sensitive)
        return float(s[s != self.protected_value][0])

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.columns.index(name)]
        except ValueError:
            raise SchemaError(f"dataset has no column {name!r}") from None

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise SchemaError(f"dataset has no column(s) {missing}")
        return self.values[:, [self.columns.index(n) for n in names]]

    def protected_mask(self) -> np.ndarray:
        return self.column(self.sensitive) == self.protected_value

    def observed_bounds(self) -> dict[str, tuple[float, float]]:
        return {c: (float(v.min()), float(v.max())) for c, v in zip(self.columns, self.values.T)}

    def ranges(self) -> dict[str, float]:
        return {c: hi - lo for c, (lo, hi) in self.observed_bounds().items()}

    def schema(self, features: Sequence[str] | None = None) -> FeatureSchema:
        """Distance schema over ``features`` (default: every covariate but the sensitive one)."""
        features = tuple(features) if features is not None else self.covariates
        if self.sensitive in features:
            raise SchemaError("the sensitive attribute cannot be a distance feature")
        ranges = self.ranges()
        return FeatureSchema(features, {f: self.kinds[f] for f in features}, {f: ranges[f] for f in features})

    def subset(self, mask) -> "Dataset":
        return replace(self, values=self.values[mask], outcome=self.outcome[mask], partial=True)

    def with_sensitive(self, s_values) -> "Dataset":
        values = self.values.copy()
        values[:, self.columns.index(self.sensitive)] = s_values
        return replace(self, values=values)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps([self.columns, self.sensitive, self.protected_value]).encode())
        h.update(np.ascontiguousarray(self.values).tobytes())
        h.update(np.ascontiguousarray(self.outcome).tobytes())
        return h.hexdigest()

    def to_csv(self, path) -> None:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(self.columns) + ["y"])
        for row, y in zip(self.values, self.outcome):
            writer.writerow([repr(float(v)) for v in row] + [int(y)])
        Path(path).write_text(buf.getvalue())


def split_by_sensitive(dataset: Dataset) -> tuple[Dataset, Dataset]:
    """Return ``(D+, D-)``: protected rows first, unprotected second."""
    mask = dataset.protected_mask()
    if mask.all() or not mask.any():
        raise SchemaError("one sensitive group is empty")
    return dataset.subset(mask), dataset.subset(~mask)


def _substream(seed: int, column: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(column,)))


def synthetic_graph(alpha: float) -> CausalGraph:
    """DAG generating the synthetic data; ``x1 -> x2`` exists only when ``alpha != 0``."""
    return CausalGraph({"x1": (), "x2": ("x1",) if alpha != 0 else (), "x3": ()})


def generate_synthetic(n: int = 1000, alpha: float = 2.0, seed: int = 0) -> Dataset:
    """Sample the three-variable synthetic population.

    x1 ~ Bernoulli(0.5) is the sensitive attribute (x1 = 0 is protected),
    x2 = alpha * x1 + N(3, 1), x3 = N(0, 1), and y = 1 iff the standardized
    x2 + x3 has non-negative logistic score, i.e. lies at or above its mean.
    Each column draws from its own seeded substream.
    """
    if n < 2:
        raise ValueError("need at least two rows")
    x1 = _substream(seed, 0).binomial(1, 0.5, size=n).astype(float)
    u2 = _substream(seed, 1).normal(3.0, 1.0, size=n)
    x3 = _substream(seed, 2).normal(0.0, 1.0, size=n)
    x2 = alpha * x1 + u2
    total = x2 + x3
    z = (total - total.mean()) / total.std()
    y = (1.0 / (1.0 + np.exp(-z)) >= 0.5).astype(int)
    return Dataset(
        columns=SYNTHETIC_COLUMNS,
        values=np.column_stack([x1, x2, x3]),
        outcome=y,
        sensitive="x1",
        kinds={"x1": "categorical", "x2": "continuous", "x3": "continuous"},
        protected_value=0.0,
        provenance={"generator": "synthetic", "n": n, "alpha": alpha, "seed": seed},
        seed=seed,
    )


def german_sex_codes() -> dict:
    text = resources.files("effort_audit").joinpath("resources/german_status_sex.json").read_text()
    return json.loads(text)


def _german_row(code: str, age: str, amount: str, duration: str, risk: str, codes, where: str):
    if code not in codes:
        raise IngestionError(f"{where}, column personal_status: unknown code {code!r}")
    try:
        nums = [float(age), float(amount), float(duration)]
    except ValueError as exc:
        raise IngestionError(f"{where}: non-numeric age/amount/duration ({exc})") from None
    if risk not in ("1", "2"):
        raise IngestionError(f"{where}, column risk: expected 1 or 2, got {risk!r}")
    return [float(codes[code]["sex"])] + nums, 1 if risk == "1" else 0


def load_german_credit(path, fmt: str = "uci", expected_rows: int | None = _UCI_ROWS) -> Dataset:
    """Read the German credit data into (sex, age, amount, duration) and y.

    ``fmt="uci"`` expects the whitespace separated ``german.data`` file.
    ``fmt="csv"`` expects a header naming at least ``personal_status, age,
    amount, duration, risk`` with UCI codes.  y = 1 marks good credit risk.
    """
    path = Path(path)
    raw = path.read_bytes()
    table = german_sex_codes()
    codes = table["codes"]
    rows, ys = [], []
    text = raw.decode("ascii", errors="replace")
    if fmt == "uci":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        for i, line in enumerate(lines, start=1):
            fields = line.split()
            if len(fields) != _UCI_WIDTH:
                raise IngestionError(f"{path}: row {i}: expected {_UCI_WIDTH} fields, found {len(fields)}")
            f = {k: fields[v] for k, v in _UCI_FIELDS.items()}
            row, y = _german_row(f["status_sex"], f["age"], f["amount"], f["duration"], f["risk"],
                                 codes, f"{path}: row {i}")
            rows.append(row)
            ys.append(y)
    elif fmt == "csv":
        reader = csv.DictReader(io.StringIO(text))
        needed = {"personal_status", "age", "amount", "duration", "risk"}
        if not reader.fieldnames or not needed <= set(reader.fieldnames):
            raise IngestionError(f"{path}: header must contain {sorted(needed)}")
        for i, rec in enumerate(reader, start=1):
            row, y = _german_row(rec["personal_status"].strip(), rec["age"], rec["amount"],
                                 rec["duration"], rec["risk"].strip(), codes, f"{path}: row {i}")
            rows.append(row)
            ys.append(y)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if expected_rows is not None and len(rows) != expected_rows:
        raise IngestionError(f"{path}: expected {expected_rows} rows, found {len(rows)}")
    return Dataset(
        columns=GERMAN_COLUMNS,
        values=np.array(rows),
        outcome=np.array(ys),
        sensitive="sex",
        kinds={"sex": "categorical", "age": "continuous", "amount": "continuous", "duration": "continuous"},
        protected_value=float(table["protected_value"]),
        provenance={
            "source": str(path),
            "format": fmt,
            "sha256": hashlib.sha256(raw).hexdigest(),
            "sex_mapping": {c: {"label": v["label"], "sex": v["sex"]} for c, v in codes.items()},
        },
    )


GERMAN_GRAPH = CausalGraph({"sex": (), "age": (), "amount": ("sex", "age"), "duration": ("amount",)})

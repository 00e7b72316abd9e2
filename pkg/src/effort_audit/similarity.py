"""Mixed-type distances and situation-testing neighborhoods."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .exceptions import SchemaError

FEATURE_KINDS = ("continuous", "ordinal", "categorical")
NORMS = ("l1", "l2")


@dataclass(frozen=True)
class FeatureSchema:
    names: tuple[str, ...]
    kinds: Mapping[str, str]
    ranges: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        for n in self.names:
            if self.kinds.get(n) not in FEATURE_KINDS:
                raise SchemaError(f"feature {n!r} has no valid kind")
            if self.kinds[n] != "categorical" and n not in self.ranges:
                raise SchemaError(f"feature {n!r} has no range")

    def to_dict(self):
        return {"features": list(self.names), "kinds": dict(self.kinds),
                "ranges": {n: float(self.ranges[n]) for n in self.names if n in self.ranges}}


def feature_distance(a, b, kind: str, range_: float | None = None):
    """Normalized Manhattan distance for numeric kinds, overlap for categorical."""
    if kind == "categorical":
        return np.where(np.asarray(a) == np.asarray(b), 0.0, 1.0)
    if kind not in FEATURE_KINDS:
        raise SchemaError(f"unknown feature kind {kind!r}")
    if range_ is None or not range_ > 0:
        warnings.warn(f"feature range {range_!r} is not positive; feature contributes 0", RuntimeWarning)
        return np.zeros(np.broadcast_shapes(np.shape(a), np.shape(b)))
    return np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) / range_


def instance_distance(x, x_other, schema: FeatureSchema, norm: str = "l1"):
    """Sum (``l1``) or root sum of squares (``l2``) of per-feature distances.

    ``x`` and ``x_other`` are arrays whose last axis follows ``schema.names``
    and broadcast against each other.
    """
    if norm not in NORMS:
        raise ValueError(f"norm must be one of {NORMS}")
    x, x_other = np.asarray(x), np.asarray(x_other)
    k = len(schema.names)
    if x.shape[-1:] != (k,) or x_other.shape[-1:] != (k,):
        raise SchemaError(f"instances must have {k} features ({', '.join(schema.names)})")
    parts = [
        feature_distance(x[..., i], x_other[..., i], schema.kinds[n], schema.ranges.get(n))
        for i, n in enumerate(schema.names)
    ]
    stacked = np.stack(parts, axis=-1)
    if norm == "l1":
        return stacked.sum(axis=-1)
    return np.sqrt((stacked**2).sum(axis=-1))


def nearest_rank(sorted_values: np.ndarray, q: float) -> float:
    """Empirical ``q``-quantile by the nearest-rank rule (no interpolation)."""
    if not 0 < q <= 1:
        raise ValueError(f"quantile must lie in (0, 1], got {q}")
    n = len(sorted_values)
    # round() guards against 0.2 * 1000 == 200.00000000000003
    rank = max(1, math.ceil(round(q * n, 9)))
    return float(sorted_values[rank - 1])


@dataclass(frozen=True)
class Neighborhood:
    center: int
    quantile: float
    threshold: float
    positive: np.ndarray  # row indices with S = protected value (I+)
    negative: np.ndarray  # row indices with S = the other value (I-)
    distances: np.ndarray  # distance of every dataset row from the center

    @property
    def members(self) -> np.ndarray:
        return np.sort(np.concatenate([self.positive, self.negative]))

    @property
    def size(self) -> int:
        return len(self.positive) + len(self.negative)


def distances_from(dataset, center: int, schema: FeatureSchema, norm: str = "l1") -> np.ndarray:
    X = dataset.matrix(schema.names)
    return instance_distance(X, X[center], schema, norm)


def build_neighborhood(dataset, center: int, q: float, schema: FeatureSchema,
                       norm: str = "l1", distances: np.ndarray | None = None) -> Neighborhood:
    """Rows within the nearest-rank ``q``-quantile of distance from ``center``.

    The center itself is part of the distance multiset (at distance 0) and
    of its own neighborhood.
    """
    if distances is None:
        distances = distances_from(dataset, center, schema, norm)
    threshold = nearest_rank(np.sort(distances), q)
    inside = distances <= threshold
    protected = dataset.protected_mask()
    return Neighborhood(
        center=center,
        quantile=q,
        threshold=threshold,
        positive=np.flatnonzero(inside & protected),
        negative=np.flatnonzero(inside & ~protected),
        distances=distances,
    )


def membership_masks(distances: np.ndarray, quantiles: Sequence[float]) -> list[np.ndarray]:
    """Boolean member masks for several quantiles sharing one distance vector."""
    ordered = np.sort(distances)
    return [distances <= nearest_rank(ordered, q) for q in quantiles]

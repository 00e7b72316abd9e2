"""Logistic-regression decision model h."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .exceptions import DegenerateLabelError, PreconditionError, SchemaError

MIN_ROWS_PER_CLASS = 10


class ConvergenceWarning(UserWarning):
    pass


def sigmoid(z):
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def objective(theta: np.ndarray, Z: np.ndarray, y: np.ndarray, l2: float) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood plus ``l2/2 * |w|^2`` and its gradient.

    ``theta = (w_1..w_k, b)``; the intercept is not penalized.
    """
    w, b = theta[:-1], theta[-1]
    z = Z @ w + b
    # log(1 + e^z) - y z, computed stably
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w)
    r = sigmoid(z) - y
    grad = np.empty_like(theta)
    grad[:-1] = Z.T @ r / len(y) + l2 * w
    grad[-1] = r.mean()
    return float(loss), grad


@dataclass(frozen=True, eq=False)
class Classifier:
    """Logistic model over standardized features.

    ``weights`` act on ``(x - mean) / scale``; the label is ``favorable``
    when the score reaches 0.5.
    """

    features: tuple[str, ...]
    weights: np.ndarray
    intercept: float
    mean: np.ndarray
    scale: np.ndarray
    favorable: int = 1
    converged: bool = True
    iterations: int = 0
    gradient_norm: float = 0.0

    @property
    def unfavorable(self) -> int:
        return 1 - self.favorable

    def _matrix(self, x) -> np.ndarray:
        if isinstance(x, Mapping):
            missing = [f for f in self.features if f not in x]
            if missing:
                raise SchemaError(f"instance lacks classifier feature(s) {missing}")
            return np.stack([np.asarray(x[f], dtype=float) for f in self.features], axis=-1)
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (len(self.features),):
            raise SchemaError(f"instance must have {len(self.features)} features ({', '.join(self.features)})")
        return x

    def logit(self, x) -> np.ndarray:
        return ((self._matrix(x) - self.mean) / self.scale) @ self.weights + self.intercept

    def score(self, x) -> np.ndarray:
        """Probability of the favorable label."""
        z = self.logit(x)
        return sigmoid(np.atleast_1d(z)).reshape(np.shape(z))

    def label(self, x) -> np.ndarray:
        return np.where(self.score(x) >= 0.5, self.favorable, self.unfavorable)

    def linear_form(self) -> tuple[np.ndarray, float]:
        """``(a, c)`` with ``logit(x) = a @ x + c`` on raw (unstandardized) features."""
        a = self.weights / self.scale
        return a, float(self.intercept - a @ self.mean)

    def to_dict(self) -> dict:
        a, c = self.linear_form()
        return {
            "features": list(self.features),
            "weights_standardized": self.weights.tolist(),
            "intercept_standardized": self.intercept,
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "weights_raw": a.tolist(),
            "intercept_raw": c,
            "favorable": self.favorable,
            "converged": self.converged,
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
        }


def predict(classifier: Classifier, x):
    """Return ``(label, score)`` for one instance or a batch."""
    return classifier.label(x), classifier.score(x)


def fit_logistic(X, y, l2: float = 1e-6, tol: float = 1e-8, max_iter: int = 10_000):
    """Batch gradient descent with Armijo backtracking on the penalized log-loss.

    Returns ``(theta, converged, iterations, grad_max_norm)``.  The search
    restarts each step from twice the previous accepted step length.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    theta = np.zeros(X.shape[1] + 1)
    loss, grad = objective(theta, X, y, l2)
    step = 1.0
    it = 0
    while it < max_iter:
        gnorm = float(np.max(np.abs(grad)))
        if gnorm < tol:
            return theta, True, it, gnorm
        g2 = float(grad @ grad)
        step = min(step * 2.0, 1e6)
        while True:
            cand = theta - step * grad
            c_loss, c_grad = objective(cand, X, y, l2)
            if c_loss <= loss - 1e-4 * step * g2 or step < 1e-16:
                break
            step *= 0.5
        if c_loss > loss:
            break
        theta, loss, grad = cand, c_loss, c_grad
        it += 1
    gnorm = float(np.max(np.abs(grad)))
    return theta, gnorm < tol, it, gnorm


def fit_classifier(dataset, features: Sequence[str], labels=None, *, favorable: int = 1,
                   l2: float = 1e-6, tol: float = 1e-8, max_iter: int = 10_000) -> Classifier:
    """Maximum-likelihood logistic regression on standardized ``features``.

    ``labels`` defaults to ``dataset.outcome``.  A :class:`ConvergenceWarning`
    is issued (and the model still returned) when the gradient tolerance is
    not reached within ``max_iter`` iterations.
    """
    features = tuple(features)
    X = dataset.matrix(features)
    y = np.asarray(dataset.outcome if labels is None else labels, dtype=int)
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise DegenerateLabelError(f"labels contain a single class {classes.tolist()}")
    if counts.min() < MIN_ROWS_PER_CLASS:
        raise PreconditionError(f"need at least {MIN_ROWS_PER_CLASS} rows per class, got {counts.tolist()}")
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    target = (y == favorable).astype(float)
    theta, converged, iters, gnorm = fit_logistic((X - mean) / scale, target, l2, tol, max_iter)
    if not converged:
        warnings.warn(
            f"logistic fit stopped after {iters} iterations with gradient max-norm {gnorm:.3g}",
            ConvergenceWarning,
            stacklevel=2,
        )
    return Classifier(
        features=features,
        weights=theta[:-1],
        intercept=float(theta[-1]),
        mean=mean,
        scale=scale,
        favorable=favorable,
        converged=converged,
        iterations=iters,
        gradient_norm=gnorm,
    )

"""Linear one-vs-rest SVM trained by dual coordinate descent.

The bias is handled as an appended constant feature (the features this model
sees are scaled to [-1, 1], so a unit bias column is on the same footing).
The solver runs on the Gram matrix of the augmented rows; grid search can
therefore factor the Gram computation out of the per-C loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ._kernels import dual_cd_solve

DEFAULT_TOL = 1e-4
DEFAULT_MAX_SWEEPS = 20000


def _check_training_inputs(X, y):
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    y = np.ascontiguousarray(np.asarray(y, dtype=np.int64))
    if X.ndim != 2:
        raise ValidationError("feature matrix must be 2-d")
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise ValidationError("labels must be 1-d and match the row count")
    if X.shape[0] == 0:
        raise ValidationError("cannot train on an empty matrix")
    if not np.isfinite(X).all():
        raise ValidationError("feature matrix contains non-finite values")
    if y.min() < 0:
        raise ValidationError("class labels must be non-negative integers")
    if np.unique(y).size < 2:
        raise ValidationError("training data contains fewer than two classes")
    return X, y


def augment_bias(X: np.ndarray) -> np.ndarray:
    return np.hstack([X, np.ones((X.shape[0], 1), dtype=X.dtype)])


def gram_matrix(X_aug: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(X_aug @ X_aug.T)


@dataclass(frozen=True, eq=False)
class SvmModel:
    """Weights include the bias as the last column entry."""

    weights: np.ndarray  # (n_classes, n_features + 1)
    n_classes: int
    c: float
    dual_objectives: tuple  # per class, ndarray of per-sweep dual values
    duality_gaps: tuple

    def decision_values(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.weights.shape[1] - 1:
            raise ValidationError(
                f"expected {self.weights.shape[1] - 1} features, got "
                f"{X.shape[1] if X.ndim == 2 else 'non-2d input'}"
            )
        return augment_bias(X) @ self.weights.T

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.decision_values(X), axis=1).astype(np.int64)


def solve_ovr_weights(Q, X_aug, y, n_classes, c,
                      tol=DEFAULT_TOL, max_sweeps=DEFAULT_MAX_SWEEPS):
    """Solve the n_classes binary problems on a precomputed Gram matrix."""
    weights = np.zeros((n_classes, X_aug.shape[1]), dtype=np.float64)
    objectives = []
    gaps = []
    for c_idx in range(n_classes):
        sign = np.where(y == c_idx, 1.0, -1.0)
        alpha, duals, gap_trace = dual_cd_solve(
            Q, sign, float(c), float(tol), int(max_sweeps)
        )
        weights[c_idx] = X_aug.T @ (alpha * sign)
        objectives.append(duals)
        gaps.append(gap_trace)
    return weights, tuple(objectives), tuple(gaps)


def train_svm(X, y, c: float, seed: int = 0,
              tol: float = DEFAULT_TOL,
              max_sweeps: int = DEFAULT_MAX_SWEEPS) -> SvmModel:
    """Train one-vs-rest linear SVM. The solver itself is deterministic given
    the inputs; `seed` is accepted for interface uniformity and unused."""
    del seed
    if not (np.isfinite(c) and c > 0):
        raise ValidationError(f"penalty C must be a positive finite number, got {c!r}")
    X, y = _check_training_inputs(X, y)
    n_classes = int(y.max()) + 1
    X_aug = augment_bias(X)
    Q = gram_matrix(X_aug)
    weights, objectives, gaps = solve_ovr_weights(
        Q, X_aug, y, n_classes, c, tol=tol, max_sweeps=max_sweeps
    )
    return SvmModel(
        weights=weights,
        n_classes=n_classes,
        c=float(c),
        dual_objectives=objectives,
        duality_gaps=gaps,
    )

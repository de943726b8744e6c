"""Single-hidden-layer perceptron: input -> 64 ReLU -> softmax.

Loss is mean cross-entropy plus 0.5 * alpha * ||W||^2 / n over the weight
matrices only (biases are not penalised). Training is full-batch Adam for a
fixed iteration count; with identical inputs, seed and dtype the resulting
weights are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from . import nets

HIDDEN_UNITS = 64


def init_mlp_params(n_features: int, n_classes: int, seed: int, dtype) -> list:
    rng = np.random.Generator(np.random.PCG64(seed))
    w1 = nets.he_normal(rng, (n_features, HIDDEN_UNITS), n_features, dtype)
    b1 = np.zeros(HIDDEN_UNITS, dtype=dtype)
    w2 = nets.he_normal(rng, (HIDDEN_UNITS, n_classes), HIDDEN_UNITS, dtype)
    b2 = np.zeros(n_classes, dtype=dtype)
    return [w1, b1, w2, b2]


def mlp_forward(params, X):
    w1, b1, w2, b2 = params
    pre = X @ w1 + b1
    hidden = np.maximum(pre, 0)
    logits = hidden @ w2 + b2
    return logits, pre, hidden


def mlp_loss_and_grads(params, X, y, alpha: float):
    """Regularised loss and gradients in parameter order [w1, b1, w2, b2]."""
    w1, b1, w2, b2 = params
    n = X.shape[0]
    logits, pre, hidden = mlp_forward(params, X)
    loss, dlogits = nets.cross_entropy_and_dlogits(logits, y)
    reg_scale = np.asarray(alpha / n, dtype=X.dtype)
    loss += float(0.5 * reg_scale * ((w1 * w1).sum() + (w2 * w2).sum()))

    dw2 = hidden.T @ dlogits + reg_scale * w2
    db2 = dlogits.sum(axis=0)
    dhidden = dlogits @ w2.T
    dpre = dhidden * (pre > 0)
    dw1 = X.T @ dpre + reg_scale * w1
    db1 = dpre.sum(axis=0)
    return loss, [dw1, db1, dw2, db2]


@dataclass(eq=False)
class MlpModel:
    params: list
    n_classes: int
    alpha: float
    seed: int
    dtype: np.dtype
    loss_trace: np.ndarray = field(repr=False)

    def _check(self, X) -> np.ndarray:
        X = np.ascontiguousarray(np.asarray(X, dtype=self.dtype))
        if X.ndim != 2 or X.shape[1] != self.params[0].shape[0]:
            raise ValidationError(
                f"expected a 2-d matrix with {self.params[0].shape[0]} columns"
            )
        return X

    def decision_values(self, X) -> np.ndarray:
        logits, _, _ = mlp_forward(self.params, self._check(X))
        return logits

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.decision_values(X), axis=1).astype(np.int64)


def train_mlp(X, y, alpha: float, seed: int, dtype=np.float32,
              n_iterations: int = nets.N_ITERATIONS) -> MlpModel:
    if not (np.isfinite(alpha) and alpha >= 0):
        raise ValidationError(f"alpha must be a non-negative finite number, got {alpha!r}")
    dtype = np.dtype(dtype)
    X, y = nets.check_classifier_inputs(X, y, dtype)
    n_classes = int(y.max()) + 1
    params = init_mlp_params(X.shape[1], n_classes, seed, dtype)
    optimizer = nets.AdamOptimizer(params)
    trace = np.empty(n_iterations, dtype=np.float64)
    for it in range(n_iterations):
        loss, grads = mlp_loss_and_grads(params, X, y, alpha)
        trace[it] = loss
        optimizer.step(params, grads)
    return MlpModel(
        params=params, n_classes=n_classes, alpha=float(alpha),
        seed=int(seed), dtype=dtype, loss_trace=trace,
    )

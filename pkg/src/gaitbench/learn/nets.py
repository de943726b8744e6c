"""Shared pieces for the neural network models: He initialisation, stable
softmax cross-entropy, and a full-batch Adam loop.

Training runs in float32 by default (the experiment grid is compute-bound);
tests pass float64 when comparing against finite differences.
"""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError

LEARNING_RATE = 1e-3
BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8
N_ITERATIONS = 2000


def check_classifier_inputs(X, y, dtype):
    X = np.ascontiguousarray(np.asarray(X, dtype=dtype))
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


def he_normal(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    scale = np.sqrt(2.0 / fan_in)
    return (rng.standard_normal(shape) * scale).astype(dtype)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def cross_entropy_and_dlogits(logits: np.ndarray, y: np.ndarray):
    """Mean cross-entropy and its gradient wrt the logits."""
    n = logits.shape[0]
    logp = log_softmax(logits)
    loss = float(-logp[np.arange(n), y].mean())
    dlogits = np.exp(logp)
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= np.asarray(n, dtype=logits.dtype)
    return loss, dlogits


class AdamOptimizer:
    """Full-batch Adam over a flat list of parameter arrays (updated in
    place). Scalar bias corrections are computed in float64 and applied in
    the parameter dtype, which keeps float32 runs deterministic."""

    def __init__(self, params, lr=LEARNING_RATE, beta1=BETA1, beta2=BETA2,
                 epsilon=EPSILON):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            dt = p.dtype.type
            m *= dt(self.beta1)
            m += dt(1.0 - self.beta1) * g
            v *= dt(self.beta2)
            v += dt(1.0 - self.beta2) * (g * g)
            m_hat = m / dt(bc1)
            v_hat = v / dt(bc2)
            p -= dt(self.lr) * m_hat / (np.sqrt(v_hat) + dt(self.epsilon))


def flatten_params(params) -> np.ndarray:
    return np.concatenate([p.reshape(-1) for p in params])


def unflatten_params(flat: np.ndarray, like) -> list:
    out = []
    pos = 0
    for p in like:
        size = p.size
        out.append(flat[pos:pos + size].reshape(p.shape).astype(p.dtype))
        pos += size
    if pos != flat.size:
        raise ValidationError("flat parameter vector has the wrong length")
    return out

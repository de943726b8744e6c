"""1-d convolutional network with a fixed architecture:

    conv(24 filters, kernel 8, stride 2, pad 4) + ReLU
    conv(32 filters, kernel 8, stride 2, pad 4) + ReLU
    conv(48 filters, kernel 6, stride 3, pad 3) + ReLU
    flatten -> dense -> softmax

Convolutions are evaluated as GEMMs over im2col patch matrices. The input
never changes across full-batch iterations, so the first layer's patch matrix
is built once per training run. No weight regularisation; optimisation is the
same fixed-step Adam recipe as the perceptron.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import as_strided

from ..errors import ValidationError
from . import nets

# (filters, kernel, stride, pad) per layer
CNN_LAYERS = ((24, 8, 2, 4), (32, 8, 2, 4), (48, 6, 3, 3))


def conv_output_length(length: int, kernel: int, stride: int, pad: int) -> int:
    out = (length + 2 * pad - kernel) // stride + 1
    if out < 1:
        raise ValidationError(
            f"kernel {kernel} with stride {stride} and pad {pad} does not fit "
            f"an input of length {length}"
        )
    return out


def flattened_size(n_channels: int, length: int) -> int:
    for filters, kernel, stride, pad in CNN_LAYERS:
        length = conv_output_length(length, kernel, stride, pad)
        n_channels = filters
    return n_channels * length


def _im2col(x: np.ndarray, kernel: int, stride: int, pad: int):
    """(n, c, L) -> patch matrix (n * L_out, c * kernel), zero padded."""
    n, c, length = x.shape
    out_len = conv_output_length(length, kernel, stride, pad)
    padded = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    sn, sc, sl = padded.strides
    view = as_strided(
        padded,
        shape=(n, c, kernel, out_len),
        strides=(sn, sc, sl, sl * stride),
    )
    cols = np.ascontiguousarray(view.transpose(0, 3, 1, 2))
    return cols.reshape(n * out_len, c * kernel), out_len


def _col2im(dcols: np.ndarray, x_shape, kernel: int, stride: int,
            pad: int, out_len: int) -> np.ndarray:
    """Scatter patch-matrix gradients back onto the (padded) input."""
    n, c, length = x_shape
    dpadded = np.zeros((n, c, length + 2 * pad), dtype=dcols.dtype)
    dcols4 = np.ascontiguousarray(
        dcols.reshape(n, out_len, c, kernel).transpose(0, 2, 3, 1)
    )
    span = stride * (out_len - 1) + 1
    for k in range(kernel):
        dpadded[:, :, k:k + span:stride] += dcols4[:, :, k, :]
    if pad == 0:
        return dpadded
    return dpadded[:, :, pad:pad + length]


def init_cnn_params(n_channels: int, length: int, n_classes: int,
                    seed: int, dtype) -> list:
    rng = np.random.Generator(np.random.PCG64(seed))
    params = []
    c_in = n_channels
    for filters, kernel, stride, pad in CNN_LAYERS:
        fan_in = c_in * kernel
        params.append(nets.he_normal(rng, (filters, fan_in), fan_in, dtype))
        params.append(np.zeros(filters, dtype=dtype))
        length = conv_output_length(length, kernel, stride, pad)
        c_in = filters
    flat_dim = c_in * length
    params.append(nets.he_normal(rng, (flat_dim, n_classes), flat_dim, dtype))
    params.append(np.zeros(n_classes, dtype=dtype))
    return params


def cnn_forward(params, x: np.ndarray, first_cols=None):
    """Returns (logits, caches, flat_hidden). `first_cols` short-circuits the
    layer-1 im2col when the caller knows the input has not changed."""
    n = x.shape[0]
    caches = []
    h = x
    for layer_idx, (filters, kernel, stride, pad) in enumerate(CNN_LAYERS):
        if layer_idx == 0 and first_cols is not None:
            cols, out_len = first_cols
        else:
            cols, out_len = _im2col(h, kernel, stride, pad)
        w = params[2 * layer_idx]
        b = params[2 * layer_idx + 1]
        pre2d = cols @ w.T + b
        mask2d = pre2d > 0
        act2d = pre2d * mask2d
        caches.append((cols, mask2d, h.shape, out_len))
        h = np.ascontiguousarray(
            act2d.reshape(n, out_len, filters).transpose(0, 2, 1)
        )
    flat = h.reshape(n, -1)
    logits = flat @ params[-2] + params[-1]
    return logits, caches, flat


def cnn_loss_and_grads(params, x: np.ndarray, y: np.ndarray, first_cols=None):
    n = x.shape[0]
    logits, caches, flat = cnn_forward(params, x, first_cols=first_cols)
    loss, dlogits = nets.cross_entropy_and_dlogits(logits, y)

    grads = [None] * len(params)
    grads[-2] = flat.T @ dlogits
    grads[-1] = dlogits.sum(axis=0)
    dflat = dlogits @ params[-2].T

    filters_last = CNN_LAYERS[-1][0]
    dh = np.ascontiguousarray(
        dflat.reshape(n, filters_last, -1)
    )
    for layer_idx in range(len(CNN_LAYERS) - 1, -1, -1):
        filters, kernel, stride, pad = CNN_LAYERS[layer_idx]
        cols, mask2d, x_shape, out_len = caches[layer_idx]
        dact2d = np.ascontiguousarray(
            dh.transpose(0, 2, 1)
        ).reshape(n * out_len, filters)
        dpre2d = dact2d * mask2d
        w = params[2 * layer_idx]
        grads[2 * layer_idx] = dpre2d.T @ cols
        grads[2 * layer_idx + 1] = dpre2d.sum(axis=0)
        if layer_idx > 0:
            dcols = dpre2d @ w
            dx = _col2im(dcols, x_shape, kernel, stride, pad, out_len)
            dh = dx
    return loss, grads


@dataclass(eq=False)
class CnnModel:
    params: list
    input_shape: tuple  # (channels, length)
    n_classes: int
    seed: int
    dtype: np.dtype
    loss_trace: np.ndarray = field(repr=False)

    def _to_3d(self, X) -> np.ndarray:
        X = np.ascontiguousarray(np.asarray(X, dtype=self.dtype))
        c, length = self.input_shape
        if X.ndim == 2 and X.shape[1] == c * length:
            return X.reshape(X.shape[0], c, length)
        if X.ndim == 3 and X.shape[1:] == (c, length):
            return X
        raise ValidationError(
            f"expected rows of length {c * length} or shape (n, {c}, {length})"
        )

    def decision_values(self, X) -> np.ndarray:
        logits, _, _ = cnn_forward(self.params, self._to_3d(X))
        return logits

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.decision_values(X), axis=1).astype(np.int64)


def train_cnn(X, y, input_shape, seed: int, dtype=np.float32,
              n_iterations: int = nets.N_ITERATIONS) -> CnnModel:
    """`input_shape` is (channels, length); rows of X are the flattened
    channel-major waveforms (channels vary slowest)."""
    dtype = np.dtype(dtype)
    X, y = nets.check_classifier_inputs(X, y, dtype)
    c, length = (int(v) for v in input_shape)
    if X.shape[1] != c * length:
        raise ValidationError(
            f"feature rows have length {X.shape[1]}, input shape "
            f"({c}, {length}) needs {c * length}"
        )
    n_classes = int(y.max()) + 1
    x3 = X.reshape(X.shape[0], c, length)
    params = init_cnn_params(c, length, n_classes, seed, dtype)
    optimizer = nets.AdamOptimizer(params)
    first_cols = _im2col(x3, CNN_LAYERS[0][1], CNN_LAYERS[0][2], CNN_LAYERS[0][3])
    trace = np.empty(n_iterations, dtype=np.float64)
    for it in range(n_iterations):
        loss, grads = cnn_loss_and_grads(params, x3, y, first_cols=first_cols)
        trace[it] = loss
        optimizer.step(params, grads)
    return CnnModel(
        params=params, input_shape=(c, length), n_classes=n_classes,
        seed=int(seed), dtype=dtype, loss_trace=trace,
    )

"""The six preprocessing steps and per-trial feature assembly.

Pipeline order for one (subject, spec): stance extraction, optional low-pass
filtering at a per-channel optimal cutoff, optional jerk (first derivative),
weight normalization, time normalization, reduction (tc / td / pca), scaling.
Weight normalization runs on the raw-rate signals, before reduction: a
per-session constant commutes with linear time normalization and keeps PCA
inputs physically meaningful.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import butter, filtfilt

from .errors import (
    DegenerateWaveformError,
    UnsupportedCombinationError,
    ValidationError,
)
from .model import (
    CombinationSpec,
    FeatureLayout,
    FeatureVector,
    stance_bounds,
)

# -3 dB point of an order-2 Butterworth applied twice shifts low; dividing the
# design cutoff by (2^(1/2)-1)^(1/4) ~ 0.8022 puts the cascade's -3 dB point
# back at the requested frequency.
DUAL_PASS_CORRECTION = (math.sqrt(2.0) - 1.0) ** 0.25

CUTOFF_CANDIDATES = np.arange(2.0, 50.0 + 1e-9, 0.5)  # 2..50 Hz in 0.5 Hz steps


def butterworth_lowpass(series, cutoff, sample_rate):
    """Zero-phase second-order Butterworth low-pass (forward + backward).

    The cutoff is corrected for the dual pass so the cascade's -3 dB point
    sits at the requested frequency. Edges are handled by reflective padding
    of three characteristic lengths (sample_rate / cutoff samples each).
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValidationError(f"series must be 1-D, got shape {x.shape}")
    if x.shape[0] < 8:
        raise ValidationError(f"series too short to filter ({x.shape[0]} < 8 samples)")
    nyquist = sample_rate / 2.0
    if not 0.0 < cutoff < nyquist:
        raise ValidationError(
            f"cutoff must lie in (0, {nyquist:g}) Hz, got {cutoff:g}"
        )
    design_cutoff = cutoff / DUAL_PASS_CORRECTION
    if design_cutoff >= nyquist:
        raise ValidationError(
            f"cutoff {cutoff:g} Hz leaves no headroom for the dual-pass "
            f"correction below the {nyquist:g} Hz Nyquist limit"
        )
    b, a = butter(2, design_cutoff / nyquist)
    pad = 3 * int(math.ceil(sample_rate / cutoff))
    padded = np.pad(x, pad, mode="reflect")
    filtered = filtfilt(b, a, padded, padlen=0)
    return filtered[pad : pad + x.shape[0]]


def _lag_one_autocorr(residual):
    r = residual - residual.mean()
    denom = float(np.dot(r, r))
    if denom == 0.0:
        return 0.0
    return float(np.dot(r[:-1], r[1:])) / denom


def optimal_cutoff(series, sample_rate):
    """Residual-whiteness cutoff selection.

    Sweeps 2-50 Hz in 0.5 Hz steps; for each candidate filters the series and
    scores |lag-one autocorrelation| of the residual raw - filtered. Returns
    the candidate with the smallest score; ties (including the all-constant
    zero-residual case) break to the lowest candidate.
    """
    x = np.asarray(series, dtype=float)
    if x.shape[0] < 32:
        raise ValidationError(
            f"series too short for cutoff selection ({x.shape[0]} < 32 samples)"
        )
    nyquist = sample_rate / 2.0
    candidates = CUTOFF_CANDIDATES[
        CUTOFF_CANDIDATES < nyquist * DUAL_PASS_CORRECTION
    ]
    if candidates.size == 0:
        raise ValidationError(
            f"sample rate {sample_rate:g} Hz leaves no usable cutoff candidates"
        )
    scale = max(1.0, float(np.abs(x).max()))
    best_fc, best_score = None, None
    for fc in candidates:
        residual = x - butterworth_lowpass(x, fc, sample_rate)
        if float(np.abs(residual).max()) <= 1e-9 * scale:
            score = 0.0
        else:
            score = abs(_lag_one_autocorr(residual))
        if best_score is None or score < best_score:
            best_fc, best_score = float(fc), score
    return best_fc


def time_derivative(series, sample_rate):
    """First time derivative: central differences inside, one-sided at ends."""
    x = np.asarray(series, dtype=float)
    if x.shape[0] < 3:
        raise ValidationError(f"need >= 3 samples for a derivative, got {x.shape[0]}")
    out = np.empty_like(x)
    out[1:-1] = (x[2:] - x[:-2]) * (sample_rate / 2.0)
    out[0] = (x[1] - x[0]) * sample_rate
    out[-1] = (x[-1] - x[-2]) * sample_rate
    return out


def time_normalize(series, n):
    """Linear interpolation onto n uniform phase points over 0-100% stance."""
    x = np.asarray(series, dtype=float)
    if x.shape[0] < 2:
        raise ValidationError(f"need >= 2 samples to time-normalize, got {x.shape[0]}")
    if n < 2:
        raise ValidationError(f"need >= 2 output points, got {n}")
    return np.interp(
        np.linspace(0.0, 1.0, int(n)), np.linspace(0.0, 1.0, x.shape[0]), x
    )


def weight_normalize(channels, body_weight):
    """Divide force (or jerk) samples by the session body weight in newtons."""
    if not (np.isfinite(body_weight) and body_weight > 0):
        raise ValidationError(f"body_weight must be positive, got {body_weight}")
    return np.asarray(channels, dtype=float) / body_weight


# ---------------------------------------------------------------------------
# Time-discrete (td) features
# ---------------------------------------------------------------------------

def _interior_maxima(y):
    """Indices of interior local maxima; plateaus collapse to their first index."""
    n = y.shape[0]
    maxima = []
    i = 1
    while i < n - 1:
        j = i
        while j + 1 < n and y[j + 1] == y[i]:
            j += 1
        # run i..j of equal values; interior max iff rises into it, falls out
        if j < n - 1 and y[i] > y[i - 1] and y[j] > y[j + 1]:
            maxima.append(i)
        i = j + 1
    return maxima


def _two_peaks_and_valley(y, foot):
    """The two largest interior maxima at least 10% of stance apart, plus the
    minimum strictly between them. Returns ((i1, i2, iv)) with i1 < i2."""
    n = y.shape[0]
    maxima = _interior_maxima(y)
    if len(maxima) < 2:
        raise DegenerateWaveformError(
            f"vertical channel has {len(maxima)} interior local maxima, need 2",
            foot=foot,
        )
    order = sorted(maxima, key=lambda i: (-y[i], i))
    primary = order[0]
    min_sep = 0.1 * (n - 1)
    secondary = next((i for i in order[1:] if abs(i - primary) >= min_sep), None)
    if secondary is None:
        raise DegenerateWaveformError(
            "no second vertical maximum at least 10% of stance away", foot=foot
        )
    i1, i2 = min(primary, secondary), max(primary, secondary)
    iv = i1 + 1 + int(np.argmin(y[i1 + 1 : i2]))
    return i1, i2, iv


def _occurrence(idx, n):
    return idx / (n - 1) * 100.0


def td_features(left, right, derivative):
    """Time-discrete landmark features from time-normalized channels.

    left/right: arrays of shape (3, T), rows fore_aft, medio_lateral,
    vertical. Feature order: left foot then right; per foot fore-aft,
    medio-lateral, vertical; per landmark value before occurrence.

    grf: fore-aft min, max; medio-lateral min, max; vertical earlier peak,
    later peak, valley between them (7 landmarks, 14 numbers per foot -> 28).
    jerk: min, max per channel (6 landmarks, 12 numbers per foot -> 24).
    """
    out = []
    for foot_name, channels in (("left", np.asarray(left)), ("right", np.asarray(right))):
        if channels.shape[0] != 3 or channels.shape[1] < 3:
            raise ValidationError(
                f"{foot_name} foot channels must be (3, T>=3), got {channels.shape}"
            )
        n = channels.shape[1]
        if derivative == "grf":
            for row in (0, 1):
                y = channels[row]
                imin, imax = int(np.argmin(y)), int(np.argmax(y))
                out += [y[imin], _occurrence(imin, n), y[imax], _occurrence(imax, n)]
            y = channels[2]
            i1, i2, iv = _two_peaks_and_valley(y, foot_name)
            out += [
                y[i1], _occurrence(i1, n),
                y[i2], _occurrence(i2, n),
                y[iv], _occurrence(iv, n),
            ]
        elif derivative == "jerk":
            for row in (0, 1, 2):
                y = channels[row]
                imin, imax = int(np.argmin(y)), int(np.argmax(y))
                out += [y[imin], _occurrence(imin, n), y[imax], _occurrence(imax, n)]
        else:
            raise ValidationError(f"unknown derivative kind {derivative!r}")
    values = np.array(out, dtype=float)
    layout = FeatureLayout(
        reduction="td",
        derivative=derivative,
        time_points=int(np.asarray(left).shape[1]),
        length=values.shape[0],
    )
    return FeatureVector(values, layout)


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class PcaModel:
    """Mean, orthonormal components (rows, decreasing variance), variance
    fractions, and the retained count k for the 98% threshold."""

    mean: np.ndarray
    components: np.ndarray
    explained: np.ndarray
    k: int
    degenerate: bool = False

    def project(self, vectors, k=None):
        k = self.k if k is None else int(k)
        v = np.atleast_2d(np.asarray(vectors, dtype=float))
        if v.shape[1] != self.mean.shape[0]:
            raise ValidationError(
                f"vector length {v.shape[1]} does not match model ({self.mean.shape[0]})"
            )
        out = (v - self.mean) @ self.components[:k].T
        return out[0] if np.asarray(vectors).ndim == 1 else out

    def reconstruct(self, coords, k=None):
        k = self.k if k is None else int(k)
        c = np.atleast_2d(np.asarray(coords, dtype=float))
        out = c @ self.components[:k] + self.mean
        return out[0] if np.asarray(coords).ndim == 1 else out


VARIANCE_THRESHOLD = 0.98


def pca_fit(matrix):
    """Principal components of mean-centered rows via singular decomposition.

    Components are ordered by decreasing explained variance; each component's
    largest-magnitude entry is made positive (deterministic sign). k is the
    smallest count whose cumulative explained-variance fraction reaches 98%.
    Zero total variance yields a flagged degenerate model with k = 1.
    """
    x = np.asarray(matrix, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValidationError(f"need a 2-D matrix with >= 2 rows, got shape {x.shape}")
    mean = x.mean(axis=0)
    centered = x - mean
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    variances = svals**2 / (x.shape[0] - 1)
    total = float(variances.sum())
    if total == 0.0:
        components = np.zeros((1, x.shape[1]))
        components[0, 0] = 1.0
        return PcaModel(
            mean=mean,
            components=components,
            explained=np.zeros(1),
            k=1,
            degenerate=True,
        )
    fractions = variances / total
    flip = vt[np.arange(vt.shape[0]), np.argmax(np.abs(vt), axis=1)] < 0
    vt = vt.copy()
    vt[flip] *= -1.0
    k = int(np.argmax(np.cumsum(fractions) >= VARIANCE_THRESHOLD)) + 1
    return PcaModel(mean=mean, components=vt, explained=fractions, k=k)


def pca_project(model, vector):
    """Centered projection of one vector onto the k retained components."""
    return model.project(vector)


# ---------------------------------------------------------------------------
# Scaling
# ---------------------------------------------------------------------------

_SCALE_SCOPES = {
    "z_at_mm_at": ("at", "at"),
    "z_at_mm_st": ("at", "st"),
    "z_st_mm_at": ("st", "at"),
    "z_st_mm_st": ("st", "st"),
}


@dataclass(eq=False)
class ScalingModel:
    """Fitted scaling statistics. Single-trial scopes carry no fitted state
    (their statistics come from each row at apply time)."""

    method: str
    reduction: str
    n_variables: int
    z_mean: np.ndarray | None = None
    z_sd: np.ndarray | None = None
    mm_min: np.ndarray | None = None
    mm_max: np.ndarray | None = None

    def __post_init__(self):
        if self.z_sd is not None and (self.z_sd < 0).any():
            raise ValidationError("z standard deviations must be >= 0")
        if self.mm_min is not None and (self.mm_min > self.mm_max).any():
            raise ValidationError("min-max statistics require min <= max")


def _variable_view(matrix, reduction):
    """View a (n_trials, n_features) matrix as (n_trials, n_vars, var_len).

    tc variables are the 6 (foot, channel) waveforms of time_points columns
    each; td/pca variables are single scalar columns.
    """
    n, d = matrix.shape
    if reduction == "tc":
        if d % 6 != 0:
            raise ValidationError(f"tc matrix width {d} is not divisible by 6")
        return matrix.reshape(n, 6, d // 6)
    return matrix.reshape(n, d, 1)


def _z_apply_at(view, mean, sd):
    out = (view - mean[None, :, None]) / np.where(sd == 0.0, 1.0, sd)[None, :, None]
    out[:, sd == 0.0, :] = 0.0
    return out


def _mm_apply_at(view, lo, hi):
    span = hi - lo
    safe = np.where(span == 0.0, 1.0, span)
    out = 2.0 * (view - lo[None, :, None]) / safe[None, :, None] - 1.0
    out[:, span == 0.0, :] = 0.0
    return out


def fit_scaling(matrix, method, reduction):
    """Fit all-trials statistics on the given matrix (the training scope)."""
    if method not in _SCALE_SCOPES:
        raise ValidationError(f"unknown scaling method {method!r}")
    z_scope, mm_scope = _SCALE_SCOPES[method]
    if reduction in ("td", "pca") and (z_scope == "st" or mm_scope == "st"):
        raise UnsupportedCombinationError(
            f"single-trial scaling is undefined for scalar {reduction} features "
            f"(method {method})"
        )
    x = np.asarray(matrix, dtype=float)
    view = _variable_view(x, reduction)
    model = ScalingModel(method=method, reduction=reduction, n_variables=view.shape[1])
    if z_scope == "at":
        model.z_mean = view.mean(axis=(0, 2))
        model.z_sd = view.std(axis=(0, 2))
        zview = _z_apply_at(view, model.z_mean, model.z_sd)
    else:
        zview = _z_apply_st(view)
    if mm_scope == "at":
        model.mm_min = zview.min(axis=(0, 2))
        model.mm_max = zview.max(axis=(0, 2))
    return model


def _z_apply_st(view):
    mean = view.mean(axis=2, keepdims=True)
    sd = view.std(axis=2, keepdims=True)
    out = (view - mean) / np.where(sd == 0.0, 1.0, sd)
    out[np.broadcast_to(sd == 0.0, out.shape)] = 0.0
    return out


def _mm_apply_st(view):
    lo = view.min(axis=2, keepdims=True)
    hi = view.max(axis=2, keepdims=True)
    span = hi - lo
    out = 2.0 * (view - lo) / np.where(span == 0.0, 1.0, span) - 1.0
    out[np.broadcast_to(span == 0.0, out.shape)] = 0.0
    return out


def apply_scaling(model, matrix):
    x = np.asarray(matrix, dtype=float)
    view = _variable_view(x, model.reduction)
    if view.shape[1] != model.n_variables:
        raise ValidationError(
            f"matrix has {view.shape[1]} variables, model fitted {model.n_variables}"
        )
    z_scope, mm_scope = _SCALE_SCOPES[model.method]
    zview = (
        _z_apply_at(view, model.z_mean, model.z_sd)
        if z_scope == "at"
        else _z_apply_st(view)
    )
    mview = (
        _mm_apply_at(zview, model.mm_min, model.mm_max)
        if mm_scope == "at"
        else _mm_apply_st(zview)
    )
    return mview.reshape(x.shape)


def scale_features(matrix, method, reduction):
    """Two scaling passes, z-transform then min-max to [-1, 1], each with its
    own fitting scope (all-trials or single-trial). Zero-variance variables
    (or min = max) map to 0 in the affected pass."""
    return apply_scaling(fit_scaling(matrix, method, reduction), matrix)


# ---------------------------------------------------------------------------
# Per-dataset preparation cache and feature assembly
# ---------------------------------------------------------------------------

_PREP_CACHE = weakref.WeakKeyDictionary()


def _dataset_cache(dataset):
    entry = _PREP_CACHE.get(dataset)
    if entry is None:
        entry = {}
        _PREP_CACHE[dataset] = entry
    return entry


def _stance_channels(dataset):
    """Per trial and foot: stance-cropped (3, n) channel stacks, cached."""
    cache = _dataset_cache(dataset)
    if "raw" not in cache:
        rows = []
        for trial in dataset.trials:
            feet = {}
            for foot_name in ("left", "right"):
                foot = trial.foot(foot_name)
                start, stop = stance_bounds(foot.vertical)
                feet[foot_name] = foot.as_matrix()[:, start:stop]
            rows.append(feet)
        cache["raw"] = rows
    return cache["raw"]


def _filtered_channels(dataset):
    """Stance channels low-passed at each channel's own optimal cutoff, cached."""
    cache = _dataset_cache(dataset)
    if "filtered" not in cache:
        raw = _stance_channels(dataset)
        fs = dataset.sample_rate
        rows, cutoffs = [], []
        for trial, feet in zip(dataset.trials, raw):
            out_feet, out_fc = {}, {}
            for foot_name, channels in feet.items():
                filtered = np.empty_like(channels)
                fcs = []
                for ch in range(3):
                    try:
                        fc = optimal_cutoff(channels[ch], fs)
                        filtered[ch] = butterworth_lowpass(channels[ch], fc, fs)
                    except ValidationError as exc:
                        raise ValidationError(
                            f"subject {trial.subject_id} session {trial.session} "
                            f"trial {trial.trial} {foot_name}: {exc}"
                        ) from None
                    fcs.append(fc)
                out_feet[foot_name] = filtered
                out_fc[foot_name] = tuple(fcs)
            rows.append(out_feet)
            cutoffs.append(out_fc)
        cache["filtered"] = rows
        cache["cutoffs"] = cutoffs
    return cache["filtered"]


def selected_cutoffs(dataset):
    """Optimal cutoffs per trial/foot/channel (Hz); triggers filtering cache."""
    _filtered_channels(dataset)
    return _dataset_cache(dataset)["cutoffs"]


def warm_caches(dataset, include_filtered: bool = False) -> None:
    """Populate the per-dataset stance (and optionally filtering) caches.

    The grid runner calls this in the parent process before forking workers
    so the expensive per-channel cutoff sweeps happen exactly once.
    """
    _stance_channels(dataset)
    if include_filtered:
        _filtered_channels(dataset)


def normalized_channel_stack(dataset, spec):
    """Array (90, 2, 3, T): per trial, foot (left, right), channel, phase point.

    Applies stance extraction, optional filtering, optional jerk, weight
    normalization, and time normalization per spec.
    """
    source = (
        _filtered_channels(dataset)
        if spec.filtering == "auto_cutoff"
        else _stance_channels(dataset)
    )
    fs = dataset.sample_rate
    t = spec.time_points
    out = np.empty((len(dataset.trials), 2, 3, t))
    for i, (trial, feet) in enumerate(zip(dataset.trials, source)):
        for f, foot_name in enumerate(("left", "right")):
            channels = feet[foot_name]
            if spec.derivative == "jerk":
                channels = np.vstack(
                    [time_derivative(channels[c], fs) for c in range(3)]
                )
            if spec.weight_norm == "yes":
                channels = weight_normalize(channels, trial.body_weight)
            for c in range(3):
                out[i, f, c] = time_normalize(channels[c], t)
    return out


def prereduction_matrix(dataset, spec):
    """(90, 6*T) matrix of concatenated waveforms, order left then right,
    fore-aft / medio-lateral / vertical within each foot."""
    stack = normalized_channel_stack(dataset, spec)
    return stack.reshape(stack.shape[0], -1)


def _reduce(dataset, spec, stack):
    n = stack.shape[0]
    if spec.reduction == "tc":
        matrix = stack.reshape(n, -1)
        layout = FeatureLayout("tc", spec.derivative, spec.time_points, matrix.shape[1])
        return matrix, layout
    if spec.reduction == "td":
        rows = []
        for i, trial in enumerate(dataset.trials):
            try:
                fv = td_features(stack[i, 0], stack[i, 1], spec.derivative)
            except DegenerateWaveformError as exc:
                raise DegenerateWaveformError(
                    str(exc),
                    subject_id=trial.subject_id,
                    session=trial.session,
                    trial=trial.trial,
                    foot=exc.foot,
                ) from None
            rows.append(fv.values)
        matrix = np.vstack(rows)
        layout = FeatureLayout("td", spec.derivative, spec.time_points, matrix.shape[1])
        return matrix, layout
    if spec.reduction == "pca":
        model = pca_fit(stack.reshape(n, -1))
        matrix = model.project(stack.reshape(n, -1))
        layout = FeatureLayout("pca", spec.derivative, spec.time_points, model.k)
        return matrix, layout
    raise ValidationError(f"unknown reduction {spec.reduction!r}")


def build_features(dataset, spec: CombinationSpec):
    """Assemble the 90 FeatureVectors and session labels for one combination."""
    stack = normalized_channel_stack(dataset, spec)
    matrix, layout = _reduce(dataset, spec, stack)
    scaled = scale_features(matrix, spec.scaling, spec.reduction)
    features = [FeatureVector(row, layout) for row in scaled]
    return features, dataset.labels()


def build_feature_matrix(dataset, spec):
    """build_features, returned as ((90, L) matrix, labels, layout)."""
    features, labels = build_features(dataset, spec)
    return np.vstack([f.values for f in features]), labels, features[0].layout


def foldwise_pca_matrix(dataset, spec, train_idx):
    """Leakage-free variant: PCA and scaling statistics fitted on the training
    rows only, then applied to all 90 trials. Returns (matrix, layout)."""
    if spec.reduction != "pca":
        raise ValidationError("foldwise fitting only applies to the pca reduction")
    pre = prereduction_matrix(dataset, spec)
    train_idx = np.asarray(sorted(train_idx), dtype=int)
    model = pca_fit(pre[train_idx])
    projected = model.project(pre)
    scaler = fit_scaling(projected[train_idx], spec.scaling, "pca")
    layout = FeatureLayout("pca", spec.derivative, spec.time_points, model.k)
    return apply_scaling(scaler, projected), layout

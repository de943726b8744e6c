"""Core value objects: force trials, preprocessing combinations, folds, metrics.

Everything here is an immutable container plus the validation and enumeration
logic the rest of the pipeline builds on. No numerics beyond basic checks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

GRAVITY = 9.81
STANCE_THRESHOLD_N = 20.0
N_SESSIONS = 6
N_TRIALS_PER_SESSION = 15

FILTERING_VALUES = ("none", "auto_cutoff")
DERIVATIVE_VALUES = ("grf", "jerk")
TIME_POINT_VALUES = (11, 101, 1001)
REDUCTION_VALUES = ("tc", "td", "pca")
WEIGHT_NORM_VALUES = ("no", "yes")
SCALING_VALUES = ("z_at_mm_at", "z_at_mm_st", "z_st_mm_at", "z_st_mm_st")
CLASSIFIER_VALUES = ("svm", "rfc", "mlp", "cnn")

CHANNEL_NAMES = ("fore_aft", "medio_lateral", "vertical")
FOOT_NAMES = ("left", "right")


def _frozen_array(values, name):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {arr.shape}")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class FootChannels:
    """Three synchronized force channels for one foot, in newtons.

    Compared by identity: arrays make generated equality ill-defined.
    """

    fore_aft: np.ndarray
    medio_lateral: np.ndarray
    vertical: np.ndarray

    def __post_init__(self):
        for name in CHANNEL_NAMES:
            object.__setattr__(self, name, _frozen_array(getattr(self, name), name))

    def __len__(self):
        return self.vertical.shape[0]

    def as_matrix(self):
        """Channels stacked as rows, shape (3, n)."""
        return np.vstack([self.fore_aft, self.medio_lateral, self.vertical])

    def channel(self, name):
        if name not in CHANNEL_NAMES:
            raise ValidationError(f"unknown channel {name!r}")
        return getattr(self, name)


@dataclass(frozen=True, eq=False)
class ForceTrial:
    """One walking trial: both feet, session label, and the session body weight."""

    subject_id: str
    session: int
    trial: int
    sample_rate: float
    body_weight: float
    left: FootChannels
    right: FootChannels

    def foot(self, name):
        if name not in FOOT_NAMES:
            raise ValidationError(f"unknown foot {name!r}")
        return self.left if name == "left" else self.right


def stance_bounds(vertical, threshold=STANCE_THRESHOLD_N):
    """Half-open index range [start, stop) of the longest run with vertical >= threshold.

    Raises ValidationError when no sample reaches the threshold.
    """
    vertical = np.asarray(vertical, dtype=float)
    above = vertical >= threshold
    if not above.any():
        raise ValidationError(
            f"no samples at or above the {threshold:g} N stance threshold"
        )
    # Run-length encode the boolean mask; ties go to the earliest run.
    padded = np.concatenate([[False], above, [False]])
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    starts, stops = edges[::2], edges[1::2]
    best = int(np.argmax(stops - starts))
    return int(starts[best]), int(stops[best])


def validate_trial(trial: ForceTrial) -> ForceTrial:
    """Check every ForceTrial invariant; return the trial or raise ValidationError."""
    if not isinstance(trial.subject_id, str) or not trial.subject_id:
        raise ValidationError("subject_id must be a non-empty string")
    if not 1 <= int(trial.session) <= N_SESSIONS:
        raise ValidationError(f"session must be in 1..{N_SESSIONS}, got {trial.session}")
    if not 1 <= int(trial.trial) <= N_TRIALS_PER_SESSION:
        raise ValidationError(
            f"trial must be in 1..{N_TRIALS_PER_SESSION}, got {trial.trial}"
        )
    if not (np.isfinite(trial.sample_rate) and trial.sample_rate > 0):
        raise ValidationError(f"sample_rate must be positive, got {trial.sample_rate}")
    if not (np.isfinite(trial.body_weight) and trial.body_weight > 0):
        raise ValidationError(f"body_weight must be positive, got {trial.body_weight}")
    for foot_name in FOOT_NAMES:
        foot = trial.foot(foot_name)
        n = len(foot.vertical)
        for ch in CHANNEL_NAMES:
            series = foot.channel(ch)
            if series.shape[0] != n:
                raise ValidationError(
                    f"{foot_name} foot channels disagree in length "
                    f"({ch} has {series.shape[0]}, vertical has {n})"
                )
            if not np.isfinite(series).all():
                raise ValidationError(f"{foot_name} {ch} contains non-finite samples")
        if n < 2:
            raise ValidationError(f"{foot_name} foot has fewer than 2 samples")
        try:
            stance_bounds(foot.vertical)
        except ValidationError as exc:
            raise ValidationError(f"{foot_name} foot: {exc}") from None
    return trial


_FIELD_KEYS = ("filtering", "deriv", "T", "red", "wn", "scale", "clf")


@dataclass(frozen=True, order=True)
class CombinationSpec:
    """One cell of the preprocessing/classifier grid.

    The container is permissive: it admits every cell of the full cartesian
    grid, including the scalar-feature cells where single-trial scaling is
    undefined. Executability is a separate question (is_executable).
    """

    filtering: str = "none"
    derivative: str = "grf"
    time_points: int = 101
    reduction: str = "tc"
    weight_norm: str = "no"
    scaling: str = "z_at_mm_at"
    classifier: str = "svm"

    def __post_init__(self):
        checks = (
            ("filtering", self.filtering, FILTERING_VALUES),
            ("derivative", self.derivative, DERIVATIVE_VALUES),
            ("time_points", self.time_points, TIME_POINT_VALUES),
            ("reduction", self.reduction, REDUCTION_VALUES),
            ("weight_norm", self.weight_norm, WEIGHT_NORM_VALUES),
            ("scaling", self.scaling, SCALING_VALUES),
            ("classifier", self.classifier, CLASSIFIER_VALUES),
        )
        for name, value, allowed in checks:
            if value not in allowed:
                raise ValidationError(f"{name} must be one of {allowed}, got {value!r}")

    @property
    def is_executable(self):
        """Scalar features (td, pca) only support the all-trials scaling pass."""
        if self.reduction in ("td", "pca"):
            return self.scaling == "z_at_mm_at"
        return True

    def serialize(self) -> str:
        wn = "1" if self.weight_norm == "yes" else "0"
        return (
            f"filtering={self.filtering};deriv={self.derivative};T={self.time_points};"
            f"red={self.reduction};wn={wn};scale={self.scaling};clf={self.classifier}"
        )

    def replace(self, **kwargs):
        from dataclasses import replace as _replace

        return _replace(self, **kwargs)


def parse_spec(text: str) -> CombinationSpec:
    """Inverse of CombinationSpec.serialize; accepts keys in any order."""
    fields = {}
    for part in text.strip().split(";"):
        if not part:
            continue
        if "=" not in part:
            raise ValidationError(f"malformed spec fragment {part!r}")
        key, value = part.split("=", 1)
        key, value = key.strip(), value.strip()
        if key not in _FIELD_KEYS:
            raise ValidationError(f"unknown spec key {key!r}")
        if key in fields:
            raise ValidationError(f"duplicate spec key {key!r}")
        fields[key] = value
    missing = [k for k in _FIELD_KEYS if k not in fields]
    if missing:
        raise ValidationError(f"spec is missing keys {missing}")
    if fields["wn"] not in ("0", "1"):
        raise ValidationError(f"wn must be 0 or 1, got {fields['wn']!r}")
    try:
        t = int(fields["T"])
    except ValueError:
        raise ValidationError(f"T must be an integer, got {fields['T']!r}") from None
    return CombinationSpec(
        filtering=fields["filtering"],
        derivative=fields["deriv"],
        time_points=t,
        reduction=fields["red"],
        weight_norm="yes" if fields["wn"] == "1" else "no",
        scaling=fields["scale"],
        classifier=fields["clf"],
    )


def enumerate_combinations(restrict_scaling: bool = False) -> list[CombinationSpec]:
    """Full grid in declared field order; 1,152 cells, or 288 with the
    scaling axis fixed to z_at_mm_at (the quantitative-analysis subset)."""
    scalings = ("z_at_mm_at",) if restrict_scaling else SCALING_VALUES
    out = []
    for filt, deriv, t, red, wn, scale, clf in itertools.product(
        FILTERING_VALUES,
        DERIVATIVE_VALUES,
        TIME_POINT_VALUES,
        REDUCTION_VALUES,
        WEIGHT_NORM_VALUES,
        scalings,
        CLASSIFIER_VALUES,
    ):
        out.append(
            CombinationSpec(
                filtering=filt,
                derivative=deriv,
                time_points=t,
                reduction=red,
                weight_norm=wn,
                scaling=scale,
                classifier=clf,
            )
        )
    return out


_FILTER_ALLOWED = {
    "filtering": set(FILTERING_VALUES),
    "deriv": set(DERIVATIVE_VALUES),
    "T": {str(t) for t in TIME_POINT_VALUES},
    "red": set(REDUCTION_VALUES),
    "wn": {"0", "1"},
    "scale": set(SCALING_VALUES),
    "clf": set(CLASSIFIER_VALUES),
}


def parse_spec_filter(text: str) -> dict:
    """Parse the grid filter mini-language, e.g. 'clf=svm,rfc;red=pca'.

    Keys reuse the serialization keys; values are comma lists; unset keys
    match every value. Returns a dict of key -> frozenset of allowed strings.
    """
    out = {}
    for part in (text or "").strip().split(";"):
        if not part:
            continue
        if "=," in part or "=" not in part:
            raise ValidationError(f"malformed filter fragment {part!r}")
        key, values = part.split("=", 1)
        key = key.strip()
        if key not in _FILTER_ALLOWED:
            raise ValidationError(
                f"unknown filter key {key!r}; expected one of {sorted(_FILTER_ALLOWED)}"
            )
        if key in out:
            raise ValidationError(f"duplicate filter key {key!r}")
        chosen = {v.strip() for v in values.split(",") if v.strip()}
        if not chosen:
            raise ValidationError(f"filter key {key!r} lists no values")
        bad = chosen - _FILTER_ALLOWED[key]
        if bad:
            raise ValidationError(
                f"filter key {key!r} has unknown values {sorted(bad)}; "
                f"allowed: {sorted(_FILTER_ALLOWED[key])}"
            )
        out[key] = frozenset(chosen)
    return out


def spec_field_strings(spec: CombinationSpec) -> dict:
    """Spec fields as serialization-key -> string-value pairs."""
    return {
        "filtering": spec.filtering,
        "deriv": spec.derivative,
        "T": str(spec.time_points),
        "red": spec.reduction,
        "wn": "1" if spec.weight_norm == "yes" else "0",
        "scale": spec.scaling,
        "clf": spec.classifier,
    }


def spec_matches_filter(spec: CombinationSpec, spec_filter: dict) -> bool:
    values = spec_field_strings(spec)
    return all(values[key] in allowed for key, allowed in spec_filter.items())


@dataclass(frozen=True)
class FeatureLayout:
    """Shape metadata for one feature vector family."""

    reduction: str
    derivative: str
    time_points: int
    length: int

    @property
    def cnn_shape(self):
        """(channels, length) the 1-D CNN consumes: tc keeps the 6 waveform
        channels; scalar families enter as a single channel."""
        if self.reduction == "tc":
            return (6, self.time_points)
        return (1, self.length)


def expected_feature_length(reduction, derivative, time_points):
    """Known-ahead feature lengths; None for pca (data dependent)."""
    if reduction == "tc":
        return time_points * 3 * 2
    if reduction == "td":
        return 28 if derivative == "grf" else 24
    if reduction == "pca":
        return None
    raise ValidationError(f"unknown reduction {reduction!r}")


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    layout: FeatureLayout

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values, "values"))
        if self.values.shape[0] != self.layout.length:
            raise ValidationError(
                f"feature vector length {self.values.shape[0]} does not match "
                f"layout length {self.layout.length}"
            )


@dataclass(frozen=True)
class FoldSplit:
    """One cross-validation fold: disjoint train/validation/test index tuples."""

    fold_index: int
    train: tuple
    validation: tuple
    test: tuple

    def __post_init__(self):
        sets = (set(self.train), set(self.validation), set(self.test))
        if sets[0] & sets[1] or sets[0] & sets[2] or sets[1] & sets[2]:
            raise ValidationError(f"fold {self.fold_index} partitions overlap")


@dataclass(frozen=True)
class MetricsRecord:
    """Classification metrics plus the per-class confusion counts behind them."""

    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: tuple = field(default=())
    fp: tuple = field(default=())
    fn: tuple = field(default=())
    tn: tuple = field(default=())

    def as_row(self):
        return {
            "f1": self.f1,
            "precision": self.precision,
            "recall": self.recall,
            "accuracy": self.accuracy,
        }

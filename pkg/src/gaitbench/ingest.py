"""Dataset loading, stance extraction, and deterministic synthetic gait data.

The on-disk schema is a long-format text layout:

    meta.csv                       header: subject,session,body_mass_kg
    trials/<subj>_<sess>_<trial>_<foot>.csv   header: t_ms,fx,fy,fz

fx = fore-aft N, fy = medio-lateral N, fz = vertical N, foot in {L, R}.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DataFormatError, ValidationError
from .model import (
    GRAVITY,
    N_SESSIONS,
    N_TRIALS_PER_SESSION,
    STANCE_THRESHOLD_N,
    FootChannels,
    ForceTrial,
    stance_bounds,
    validate_trial,
)

TRIALS_PER_SUBJECT = N_SESSIONS * N_TRIALS_PER_SESSION  # 90


@dataclass(frozen=True, eq=False)
class SubjectDataset:
    """All 90 trials of one subject, sorted by (session, trial).

    Identity semantics (hashable) so caches can key on the instance.
    """

    subject_id: str
    trials: tuple

    @property
    def sample_rate(self):
        return self.trials[0].sample_rate

    def labels(self):
        """Session number of each trial, aligned with self.trials."""
        return np.array([t.session for t in self.trials], dtype=int)

    def body_weight(self, session):
        for t in self.trials:
            if t.session == session:
                return t.body_weight
        raise ValidationError(f"subject {self.subject_id} has no session {session}")

    def validate(self):
        counts = {}
        for t in self.trials:
            counts[t.session] = counts.get(t.session, 0) + 1
        expect = {s: N_TRIALS_PER_SESSION for s in range(1, N_SESSIONS + 1)}
        if counts != expect:
            raise ValidationError(
                f"subject {self.subject_id} has session histogram {counts}, "
                f"expected 15 trials for each session 1..6"
            )
        rates = {t.sample_rate for t in self.trials}
        if len(rates) != 1:
            raise ValidationError(
                f"subject {self.subject_id} mixes sample rates {sorted(rates)}"
            )
        return self


def extract_stance(vertical, threshold=STANCE_THRESHOLD_N):
    """Index range [start, stop) of the longest run with vertical >= threshold.

    Ties between equally long runs go to the earliest. Idempotent on series
    that are already cropped to stance.
    """
    return stance_bounds(vertical, threshold)


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------

def _rng(seed, *key):
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=key))
    )


def _vertical_shape(p1, a1, p2, a2, valley):
    """Smooth two-hump vertical profile (fractions of body weight) on phase [0,1].

    Shape-preserving interpolation over monotone knot runs guarantees exactly
    two interior local maxima (at p1 and p2) and one valley between them.
    """
    phases = np.array([0.0, 0.05, p1, 0.5, p2, 0.95, 1.0])
    values = np.array([0.004, 0.10, a1, valley, a2, 0.09, 0.003])
    return PchipInterpolator(phases, values)


def _synth_trial_arrays(phase, bw, params):
    """Evaluate the three channels for one foot on a phase grid."""
    vert = _vertical_shape(
        params["p1"], params["a1"], params["p2"], params["a2"], params["valley"]
    )(phase) * bw
    # session signature: a windowed harmonic rides on the vertical channel.
    # Different sessions get different harmonic orders at equal energy, so
    # the between-session structure spans several comparable principal axes
    # instead of one dominant amplitude axis. The window vanishes (with zero
    # slope) at both ends, leaving stance detection untouched.
    if params.get("bump_amp"):
        window = np.sin(np.pi * phase) ** 2
        vert = vert + params["bump_amp"] * bw * np.sin(
            params["bump_k"] * np.pi * phase
        ) * window
    fore = -params["fa"] * bw * np.sin(2.0 * np.pi * phase)
    medio = params["ml"] * bw * np.sin(3.0 * np.pi * phase) * (1.0 + 0.25 * (phase - 0.5))
    return fore, medio, vert


def synthesize_dataset(
    n_subjects,
    seed,
    noise_sigma=0.01,
    trial_jitter=None,
    session_effect=0.05,
    sample_rate=1000.0,
):
    """Generate deterministic synthetic subjects.

    Per subject: a physiological base stance shape (two vertical humps peaking
    near 1.1 BW at ~25%/75% phase, valley ~0.75 BW, braking/propulsion
    fore-aft sine at ~0.2 BW, low medio-lateral oscillation, stance 600-800 ms
    at 1000 Hz). Per session: parametric amplitude/timing offsets of a few
    percent so sessions separate through waveform shape, never through noise
    level. Per trial: parameter jitter plus additive Gaussian noise with
    sigma = noise_sigma * BW.

    trial_jitter defaults to noise_sigma / 2 so that noise_sigma = 0 makes the
    15 trials of a session exactly identical.
    """
    if n_subjects < 1:
        raise ValidationError(f"n_subjects must be >= 1, got {n_subjects}")
    if noise_sigma < 0:
        raise ValidationError("noise_sigma must be >= 0")
    if trial_jitter is None:
        trial_jitter = 0.5 * noise_sigma
    datasets = []
    for subj_idx in range(n_subjects):
        subject_id = f"S{subj_idx + 1:02d}"
        srng = _rng(seed, subj_idx)

        mass = srng.uniform(55.0, 95.0)
        base = {}
        for foot_idx, foot in enumerate(("L", "R")):
            asym = 1.0 + srng.uniform(-0.02, 0.02)
            base[foot] = {
                "duration_ms": srng.uniform(640.0, 770.0) * asym,
                "p1": srng.uniform(0.23, 0.27),
                "a1": srng.uniform(1.05, 1.15),
                "p2": srng.uniform(0.73, 0.77),
                "a2": srng.uniform(1.03, 1.13),
                "valley": srng.uniform(0.70, 0.80),
                "fa": srng.uniform(0.16, 0.24),
                "ml": srng.uniform(0.035, 0.065),
            }
        # Distinct per-parameter session orderings: every session gets its own
        # signature of offsets instead of one global "bigger/smaller" axis.
        offsets = np.linspace(-1.0, 1.0, N_SESSIONS)
        perm = {
            name: srng.permutation(N_SESSIONS)
            for name in ("vert", "fa", "ml", "timing", "duration", "shape")
        }
        mass_drift = srng.uniform(-0.4, 0.4, size=N_SESSIONS)

        trials = []
        for sess_idx in range(N_SESSIONS):
            session = sess_idx + 1
            sess_mass = mass + mass_drift[sess_idx]
            bw = sess_mass * GRAVITY
            sess_scale = {
                "vert": 1.0 + session_effect * offsets[perm["vert"][sess_idx]],
                "fa": 1.0 + session_effect * offsets[perm["fa"][sess_idx]],
                "ml": 1.0 + session_effect * offsets[perm["ml"][sess_idx]],
                "duration": 1.0 + 0.5 * session_effect * offsets[perm["duration"][sess_idx]],
            }
            sess_shift = 0.3 * session_effect * offsets[perm["timing"][sess_idx]] * 0.1
            sess_bump_k = 2 + int(perm["shape"][sess_idx])

            for trial_idx in range(N_TRIALS_PER_SESSION):
                trial_no = trial_idx + 1
                trng = _rng(seed, subj_idx, session, trial_no)
                feet = {}
                for foot in ("L", "R"):
                    p = base[foot]
                    jit = trng.standard_normal(6) * trial_jitter
                    params = {
                        "p1": float(np.clip(p["p1"] + sess_shift + 0.2 * jit[0] * 0.1, 0.15, 0.35)),
                        "p2": float(np.clip(p["p2"] + sess_shift + 0.2 * jit[1] * 0.1, 0.65, 0.85)),
                        "a1": p["a1"] * sess_scale["vert"] * (1.0 + jit[2]),
                        "a2": p["a2"] * sess_scale["vert"] * (1.0 + jit[3]),
                        "valley": p["valley"] * sess_scale["vert"] * (1.0 + 0.5 * jit[2]),
                        "fa": p["fa"] * sess_scale["fa"] * (1.0 + jit[4]),
                        "ml": p["ml"] * sess_scale["ml"] * (1.0 + jit[5]),
                        "bump_amp": session_effect * (1.0 + 0.5 * jit[0]),
                        "bump_k": sess_bump_k,
                    }
                    dur = p["duration_ms"] * sess_scale["duration"] * (
                        1.0 + 0.5 * trial_jitter * trng.standard_normal()
                    )
                    n = int(round(dur * sample_rate / 1000.0)) + 1
                    phase = np.arange(n) / (n - 1)
                    fore, medio, vert = _synth_trial_arrays(phase, bw, params)
                    if noise_sigma > 0:
                        noise = trng.standard_normal((3, n)) * (noise_sigma * bw)
                        fore = fore + noise[0]
                        medio = medio + noise[1]
                        vert = vert + noise[2]
                    feet[foot] = FootChannels(fore, medio, vert)
                trials.append(
                    ForceTrial(
                        subject_id=subject_id,
                        session=session,
                        trial=trial_no,
                        sample_rate=sample_rate,
                        body_weight=bw,
                        left=feet["L"],
                        right=feet["R"],
                    )
                )
        datasets.append(SubjectDataset(subject_id, tuple(trials)).validate())
    return datasets


# ---------------------------------------------------------------------------
# Disk IO
# ---------------------------------------------------------------------------

def write_dataset(datasets, out_dir):
    """Write datasets in the canonical schema. Floats use repr (round-trip exact)."""
    out = Path(out_dir)
    trials_dir = out / "trials"
    trials_dir.mkdir(parents=True, exist_ok=True)
    meta_rows = []
    n_files = 0
    for ds in datasets:
        seen = set()
        for trial in ds.trials:
            if trial.session not in seen:
                seen.add(trial.session)
                meta_rows.append(
                    (ds.subject_id, trial.session, trial.body_weight / GRAVITY)
                )
            step_ms = 1000.0 / trial.sample_rate
            for foot_code, foot in (("L", trial.left), ("R", trial.right)):
                path = trials_dir / (
                    f"{ds.subject_id}_{trial.session}_{trial.trial}_{foot_code}.csv"
                )
                with open(path, "w", newline="") as fh:
                    fh.write("t_ms,fx,fy,fz\n")
                    for i in range(len(foot)):
                        fh.write(
                            f"{repr(i * step_ms)},{repr(float(foot.fore_aft[i]))},"
                            f"{repr(float(foot.medio_lateral[i]))},{repr(float(foot.vertical[i]))}\n"
                        )
                n_files += 1
    meta_rows.sort(key=lambda r: (r[0], r[1]))
    with open(out / "meta.csv", "w", newline="") as fh:
        fh.write("subject,session,body_mass_kg\n")
        for subject, session, mass in meta_rows:
            fh.write(f"{subject},{session},{repr(float(mass))}\n")
    return n_files


def _read_meta(path):
    masses = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["subject", "session", "body_mass_kg"]:
            raise DataFormatError(
                f"{path}: expected header subject,session,body_mass_kg, "
                f"got {reader.fieldnames}"
            )
        for line_no, row in enumerate(reader, start=2):
            try:
                key = (row["subject"], int(row["session"]))
                masses[key] = float(row["body_mass_kg"])
            except (TypeError, KeyError, ValueError):
                raise DataFormatError(f"{path}:{line_no}: malformed meta row {row}") from None
    return masses


def _read_trial_file(path):
    data = np.genfromtxt(path, delimiter=",", skip_header=1, dtype=float)
    if data.ndim == 1:
        data = data.reshape(1, -1)
    if data.shape[0] < 2 or data.shape[1] != 4 or not np.isfinite(data).all():
        raise DataFormatError(f"{path}: expected >= 2 rows of t_ms,fx,fy,fz")
    with open(path) as fh:
        header = fh.readline().strip()
    if header != "t_ms,fx,fy,fz":
        raise DataFormatError(f"{path}: expected header t_ms,fx,fy,fz, got {header!r}")
    steps = np.diff(data[:, 0])
    if steps.min() <= 0 or (abs(steps - steps[0]) > 1e-6 * steps[0]).any():
        raise DataFormatError(f"{path}: t_ms must increase uniformly")
    sample_rate = 1000.0 / steps[0]
    return sample_rate, data[:, 1], data[:, 2], data[:, 3]


def load_dataset(data_dir, subjects=None, strict=True):
    """Load every subject found under data_dir in the canonical schema.

    subjects: optional iterable of subject ids to keep. strict=False admits
    subjects with incomplete session/trial grids (a warning is emitted);
    strict mode raises on any count violation.
    """
    root = Path(data_dir)
    meta_path = root / "meta.csv"
    trials_dir = root / "trials"
    if not meta_path.is_file():
        raise DataFormatError(f"missing {meta_path}")
    if not trials_dir.is_dir():
        raise DataFormatError(f"missing {trials_dir}/")
    masses = _read_meta(meta_path)

    keep = set(subjects) if subjects is not None else None
    grouped = {}
    for path in sorted(trials_dir.glob("*.csv")):
        parts = path.stem.rsplit("_", 3)
        if len(parts) != 4:
            raise DataFormatError(
                f"{path.name}: expected <subject>_<session>_<trial>_<foot>.csv"
            )
        subject, session_s, trial_s, foot = parts
        if keep is not None and subject not in keep:
            continue
        try:
            session, trial = int(session_s), int(trial_s)
        except ValueError:
            raise DataFormatError(f"{path.name}: non-integer session/trial") from None
        if foot not in ("L", "R"):
            raise DataFormatError(f"{path.name}: foot must be L or R, got {foot!r}")
        grouped.setdefault(subject, {}).setdefault((session, trial), {})[foot] = path

    if keep is not None:
        missing = keep - set(grouped)
        if missing:
            raise DataFormatError(f"no trial files for subjects {sorted(missing)}")

    datasets = []
    for subject in sorted(grouped):
        trials = []
        for (session, trial), feet in sorted(grouped[subject].items()):
            if set(feet) != {"L", "R"}:
                raise DataFormatError(
                    f"subject {subject} session {session} trial {trial}: "
                    f"missing foot file ({sorted(feet)} present)"
                )
            if (subject, session) not in masses:
                raise DataFormatError(
                    f"meta.csv has no body mass for subject {subject} session {session}"
                )
            rate_l, fx_l, fy_l, fz_l = _read_trial_file(feet["L"])
            rate_r, fx_r, fy_r, fz_r = _read_trial_file(feet["R"])
            if abs(rate_l - rate_r) > 1e-6 * rate_l:
                raise DataFormatError(
                    f"subject {subject} session {session} trial {trial}: "
                    f"feet disagree on sample rate"
                )
            trials.append(
                validate_trial(
                    ForceTrial(
                        subject_id=subject,
                        session=session,
                        trial=trial,
                        sample_rate=rate_l,
                        body_weight=masses[(subject, session)] * GRAVITY,
                        left=FootChannels(fx_l, fy_l, fz_l),
                        right=FootChannels(fx_r, fy_r, fz_r),
                    )
                )
            )
        ds = SubjectDataset(subject, tuple(trials))
        if strict:
            try:
                ds.validate()
            except ValidationError as exc:
                raise DataFormatError(str(exc)) from None
        else:
            try:
                ds.validate()
            except ValidationError as exc:
                warnings.warn(f"admitting incomplete subject: {exc}", stacklevel=2)
        datasets.append(ds)
    if not datasets:
        raise DataFormatError(f"no subjects found under {root}")
    return datasets

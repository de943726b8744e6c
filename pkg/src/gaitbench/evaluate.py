"""Stratified 15-fold cross-validation and per-combination evaluation.

Fold construction: within each session, a seeded permutation of its 15 trials
sends trial j to test fold perm[j]. The validation set of fold f is the test
set of fold (f+1) mod 15, so every test and validation set holds exactly one
trial per session and the 15 test sets partition all 90 trials. Training uses
the remaining 78.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import GaitbenchError, ValidationError
from .learn.grid import HyperGrid, search_fold
from .metrics import (confusion_counts, macro_f1, mean_record,
                      metrics_from_counts, score_predictions)
from .model import (CombinationSpec, FoldSplit, MetricsRecord, N_SESSIONS,
                    N_TRIALS_PER_SESSION)
from .preprocess import build_feature_matrix, foldwise_pca_matrix
from .seeding import derive_seed

N_FOLDS = 15

# names the rest of the package uses for the metric primitives
confusion = confusion_counts
metrics = metrics_from_counts


def stratified_folds(labels, seed: int):
    """15 FoldSplits over 90 session labels (values 1..6, 15 each)."""
    labels = np.asarray(labels, dtype=np.int64)
    expected = N_SESSIONS * N_TRIALS_PER_SESSION
    if labels.ndim != 1 or labels.shape[0] != expected:
        raise ValidationError(
            f"expected {expected} labels, got shape {labels.shape}"
        )
    for session in range(1, N_SESSIONS + 1):
        count = int(np.sum(labels == session))
        if count != N_TRIALS_PER_SESSION:
            raise ValidationError(
                f"session {session} has {count} trials, expected "
                f"{N_TRIALS_PER_SESSION}"
            )

    rng = np.random.Generator(np.random.PCG64(int(seed)))
    fold_of = np.empty(expected, dtype=np.int64)
    for session in range(1, N_SESSIONS + 1):
        idx = np.flatnonzero(labels == session)
        perm = rng.permutation(N_TRIALS_PER_SESSION)
        fold_of[idx] = perm

    folds = []
    for f in range(N_FOLDS):
        val_fold = (f + 1) % N_FOLDS
        test = tuple(int(i) for i in np.flatnonzero(fold_of == f))
        val = tuple(int(i) for i in np.flatnonzero(fold_of == val_fold))
        train = tuple(
            int(i) for i in np.flatnonzero(
                (fold_of != f) & (fold_of != val_fold)
            )
        )
        folds.append(
            FoldSplit(fold_index=f, train=train, validation=val, test=test)
        )
    return folds


@dataclass(frozen=True, eq=False)
class CombinationResult:
    """Everything evaluate_combination learned about one (subject, spec)."""

    subject_id: str
    spec: CombinationSpec
    records: tuple  # 15 MetricsRecords in fold order
    mean: MetricsRecord
    chosen_params: tuple  # winning hyperparameters per fold
    val_f1s: tuple
    seconds: tuple  # per-fold grid-search + scoring wall time
    total_seconds: float


def _with_identity(exc: GaitbenchError, subject_id, spec, fold):
    where = f"subject={subject_id} spec={spec.serialize()}"
    if fold is not None:
        where += f" fold={fold}"
    message = str(exc.args[0]) if exc.args else exc.__class__.__name__
    exc.args = (f"[{where}] {message}",) + tuple(exc.args[1:])
    return exc


def evaluate_combination(dataset, spec: CombinationSpec, seed: int,
                         grid="coarse", pca_foldwise: bool = False,
                         dtype=np.float32,
                         label_permutation_seed=None) -> CombinationResult:
    """Features -> folds -> per-fold grid search -> test metrics.

    `seed` is the global run seed: folds derive from (seed, subject) so every
    spec sees the same partition, while training streams derive from
    (seed, subject, spec serialization).

    `label_permutation_seed` is the chance-level control knob: it evaluates a
    label-shuffled copy of the dataset. The shuffle happens before fold
    construction, so folds stay stratified (balanced) on the shuffled labels
    while the label-feature link is destroyed.
    """
    if isinstance(grid, str):
        grid = HyperGrid.from_name(grid)
    task_seed = derive_seed(seed, dataset.subject_id, spec.serialize())
    fold_seed = derive_seed(seed, "folds", dataset.subject_id)

    labels = np.asarray(dataset.labels(), dtype=np.int64)
    if label_permutation_seed is not None:
        perm_rng = np.random.Generator(
            np.random.PCG64(derive_seed(label_permutation_seed, "label-permutation"))
        )
        labels = labels[perm_rng.permutation(labels.shape[0])]
    folds = stratified_folds(labels, fold_seed)
    y = labels - 1  # classifiers count classes from 0

    per_fold_matrices = pca_foldwise and spec.reduction == "pca"
    matrix = layout = None
    if not per_fold_matrices:
        try:
            matrix, _, layout = build_feature_matrix(dataset, spec)
        except GaitbenchError as exc:
            raise _with_identity(exc, dataset.subject_id, spec, None)

    records = []
    chosen = []
    val_f1s = []
    seconds = []
    for fold in folds:
        t0 = time.perf_counter()
        try:
            if per_fold_matrices:
                fold_matrix, fold_layout = foldwise_pca_matrix(
                    dataset, spec, fold.train
                )
            else:
                fold_matrix, fold_layout = matrix, layout
            tr = np.asarray(fold.train, dtype=np.int64)
            va = np.asarray(fold.validation, dtype=np.int64)
            te = np.asarray(fold.test, dtype=np.int64)
            result = search_fold(
                spec.classifier, fold.fold_index,
                fold_matrix[tr], y[tr], fold_matrix[va], y[va],
                grid, task_seed, n_classes=N_SESSIONS,
                cnn_shape=fold_layout.cnn_shape, dtype=dtype,
            )
            test_pred = result.model.predict(fold_matrix[te])
            record = score_predictions(y[te], test_pred, N_SESSIONS)
        except GaitbenchError as exc:
            raise _with_identity(exc, dataset.subject_id, spec, fold.fold_index)
        records.append(record)
        chosen.append(result.best_params)
        val_f1s.append(result.best_val_f1)
        seconds.append(time.perf_counter() - t0)

    return CombinationResult(
        subject_id=dataset.subject_id,
        spec=spec,
        records=tuple(records),
        mean=mean_record(records),
        chosen_params=tuple(chosen),
        val_f1s=tuple(val_f1s),
        seconds=tuple(seconds),
        total_seconds=float(sum(seconds)),
    )


__all__ = [
    "CombinationResult",
    "N_FOLDS",
    "confusion",
    "confusion_counts",
    "evaluate_combination",
    "macro_f1",
    "mean_record",
    "metrics",
    "metrics_from_counts",
    "score_predictions",
    "stratified_folds",
]

"""Hyperparameter grids and validation-driven selection.

Per fold: every grid point is trained on the 78 training trials and scored by
macro F1 on the 6 validation trials. The best point wins, ties going to the
first point in grid order. Because training is deterministic, the model
trained during the sweep IS the retrained winner (same data, same seed), so
it is returned directly for test scoring.

Two shortcuts keep the sweep affordable without changing results:
  - SVM: the Gram matrix of the training rows is shared across all C values.
  - RFC: tree t depends only on (seed, t), so one forest at the largest tree
    count per depth yields every smaller tree count by truncation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..metrics import macro_f1
from ..seeding import derive_seed
from . import cnn as cnn_mod
from . import mlp as mlp_mod
from .forest import ForestModel, max_split_features, train_rfc
from .svm import (DEFAULT_MAX_SWEEPS, DEFAULT_TOL, SvmModel, augment_bias,
                  gram_matrix, solve_ovr_weights)
from ._kernels import fit_forest, majority_vote

GRID_PRESETS = ("paper", "coarse")


@dataclass(frozen=True)
class HyperGrid:
    """Candidate lists per classifier. Order matters: ties in validation F1
    resolve to the earlier point."""

    name: str
    svm_c: tuple
    rfc_points: tuple  # (n_trees, max_depth) pairs
    mlp_alpha: tuple

    @classmethod
    def paper(cls) -> "HyperGrid":
        return cls(
            name="paper",
            svm_c=tuple(float(2.0 ** (-5 + 0.25 * i)) for i in range(81)),
            rfc_points=tuple(
                (trees, depth)
                for trees in range(200, 351, 25)
                for depth in range(4, 9)
            ),
            mlp_alpha=tuple(float(10.0 ** (-i)) for i in range(1, 8)),
        )

    @classmethod
    def coarse(cls) -> "HyperGrid":
        return cls(
            name="coarse",
            svm_c=tuple(float(2.0 ** (-5 + 2 * i)) for i in range(11)),
            rfc_points=tuple(
                (trees, depth)
                for trees in (200, 275, 350)
                for depth in (4, 6, 8)
            ),
            mlp_alpha=(1e-1, 1e-3, 1e-5, 1e-7),
        )

    @classmethod
    def from_name(cls, name: str) -> "HyperGrid":
        if name == "paper":
            return cls.paper()
        if name == "coarse":
            return cls.coarse()
        raise ValidationError(
            f"unknown grid preset {name!r}; expected one of {GRID_PRESETS}"
        )

    def points(self, classifier: str) -> tuple:
        """Grid points for one classifier as (params-dict, ...) in order."""
        if classifier == "svm":
            return tuple({"C": c} for c in self.svm_c)
        if classifier == "rfc":
            return tuple(
                {"n_trees": t, "max_depth": d} for t, d in self.rfc_points
            )
        if classifier == "mlp":
            return tuple({"alpha": a} for a in self.mlp_alpha)
        if classifier == "cnn":
            return ({},)
        raise ValidationError(f"unknown classifier kind {classifier!r}")


@dataclass(frozen=True, eq=False)
class FoldSearchResult:
    fold_index: int
    classifier: str
    best_params: dict
    best_val_f1: float
    model: object
    evaluations: tuple  # ((params, val_f1), ...) in grid order
    seconds: float


def _pick_best(evaluations) -> int:
    best_idx = 0
    best_f1 = evaluations[0][1]
    for i in range(1, len(evaluations)):
        if evaluations[i][1] > best_f1:
            best_idx = i
            best_f1 = evaluations[i][1]
    return best_idx


def _search_svm(X_train, y_train, X_val, y_val, grid, n_classes):
    X_aug = augment_bias(np.asarray(X_train, dtype=np.float64))
    Q = gram_matrix(X_aug)
    y_train = np.asarray(y_train, dtype=np.int64)
    evaluations = []
    models = []
    for c in grid.svm_c:
        weights, objectives, gaps = solve_ovr_weights(
            Q, X_aug, y_train, n_classes, c,
            tol=DEFAULT_TOL, max_sweeps=DEFAULT_MAX_SWEEPS,
        )
        model = SvmModel(
            weights=weights, n_classes=n_classes, c=float(c),
            dual_objectives=objectives, duality_gaps=gaps,
        )
        val_f1 = macro_f1(y_val, model.predict(X_val), n_classes)
        evaluations.append(({"C": float(c)}, val_f1))
        models.append(model)
    best = _pick_best(evaluations)
    return evaluations, models[best]


def _search_rfc(X_train, y_train, X_val, y_val, grid, n_classes, seed):
    X_train = np.ascontiguousarray(np.asarray(X_train, dtype=np.float64))
    y_train = np.ascontiguousarray(np.asarray(y_train, dtype=np.int64))
    X_val = np.ascontiguousarray(np.asarray(X_val, dtype=np.float64))

    depth_order = []
    max_trees_per_depth = {}
    for trees, depth in grid.rfc_points:
        if depth not in max_trees_per_depth:
            depth_order.append(depth)
            max_trees_per_depth[depth] = trees
        else:
            max_trees_per_depth[depth] = max(max_trees_per_depth[depth], trees)

    forests = {}
    val_votes = {}
    for depth in depth_order:
        arrays = fit_forest(
            X_train, y_train, n_classes, int(max_trees_per_depth[depth]),
            int(depth), max_split_features(X_train.shape[1]),
            int(seed) & 0x7FFFFFFFFFFFFFFF,
        )
        model = ForestModel(
            feature=arrays[0], threshold=arrays[1], left=arrays[2],
            right=arrays[3], leaf_class=arrays[4], n_nodes=arrays[5],
            n_classes=n_classes, n_features=X_train.shape[1],
            n_trees=int(max_trees_per_depth[depth]), max_depth=int(depth),
            seed=int(seed),
        )
        forests[depth] = model
        val_votes[depth] = model.tree_votes(X_val)

    evaluations = []
    for trees, depth in grid.rfc_points:
        pred = majority_vote(val_votes[depth], n_classes, int(trees))
        val_f1 = macro_f1(y_val, pred, n_classes)
        evaluations.append(({"n_trees": trees, "max_depth": depth}, val_f1))
    best = _pick_best(evaluations)
    best_trees, best_depth = grid.rfc_points[best]
    return evaluations, forests[best_depth].prefix(best_trees)


def _search_mlp(X_train, y_train, X_val, y_val, grid, n_classes, seed, dtype):
    evaluations = []
    models = []
    for alpha in grid.mlp_alpha:
        model = mlp_mod.train_mlp(X_train, y_train, alpha, seed, dtype=dtype)
        val_f1 = macro_f1(y_val, model.predict(X_val), n_classes)
        evaluations.append(({"alpha": float(alpha)}, val_f1))
        models.append(model)
    best = _pick_best(evaluations)
    return evaluations, models[best]


def search_fold(classifier: str, fold_index: int, X_train, y_train,
                X_val, y_val, grid: HyperGrid, seed: int,
                n_classes: int = 6, cnn_shape=None,
                dtype=np.float32) -> FoldSearchResult:
    """Run the grid for one fold and return the winning model.

    `seed` should already identify (subject, spec); the per-fold training
    seed is derived from it and the fold index.
    """
    t0 = time.perf_counter()
    fold_seed = derive_seed(seed, "fold", fold_index)
    if classifier == "svm":
        evaluations, model = _search_svm(
            X_train, y_train, X_val, y_val, grid, n_classes
        )
    elif classifier == "rfc":
        evaluations, model = _search_rfc(
            X_train, y_train, X_val, y_val, grid, n_classes, fold_seed
        )
    elif classifier == "mlp":
        evaluations, model = _search_mlp(
            X_train, y_train, X_val, y_val, grid, n_classes, fold_seed, dtype
        )
    elif classifier == "cnn":
        if cnn_shape is None:
            raise ValidationError("cnn requires the (channels, length) shape")
        model = cnn_mod.train_cnn(
            X_train, y_train, cnn_shape, fold_seed, dtype=dtype
        )
        val_f1 = macro_f1(y_val, model.predict(X_val), n_classes)
        evaluations = [({}, val_f1)]
    else:
        raise ValidationError(f"unknown classifier kind {classifier!r}")

    best = _pick_best(evaluations)
    return FoldSearchResult(
        fold_index=fold_index,
        classifier=classifier,
        best_params=dict(evaluations[best][0]),
        best_val_f1=float(evaluations[best][1]),
        model=model,
        evaluations=tuple((dict(p), float(f)) for p, f in evaluations),
        seconds=time.perf_counter() - t0,
    )


def grid_search(classifier: str, X, y, folds, grid: HyperGrid, seed: int,
                n_classes: int = 6, cnn_shape=None,
                dtype=np.float32) -> list:
    """Convenience wrapper: run search_fold over a full fold list against a
    single shared feature matrix."""
    X = np.asarray(X)
    y = np.asarray(y, dtype=np.int64)
    results = []
    for fold in folds:
        tr = np.asarray(fold.train, dtype=np.int64)
        va = np.asarray(fold.validation, dtype=np.int64)
        results.append(
            search_fold(
                classifier, fold.fold_index, X[tr], y[tr], X[va], y[va],
                grid, seed, n_classes=n_classes, cnn_shape=cnn_shape,
                dtype=dtype,
            )
        )
    return results

"""Random forest of CART trees (Gini impurity, bootstrap rows, sqrt(d)
feature candidates per split, majority vote with ties to the lowest class).

Tree t's random stream is keyed by (seed, t) alone, so the first k trees of
any larger forest trained with the same seed are identical to a k-tree
forest. Grid search exploits that: one fit at the largest tree count per
depth serves every smaller tree count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ._kernels import fit_forest, forest_tree_votes, majority_vote


def max_split_features(n_features: int) -> int:
    return max(1, int(math.floor(math.sqrt(n_features))))


@dataclass(frozen=True, eq=False)
class ForestModel:
    feature: np.ndarray  # (n_trees, max_nodes), -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_class: np.ndarray
    n_nodes: np.ndarray
    n_classes: int
    n_features: int
    n_trees: int
    max_depth: int
    seed: int

    def _check(self, X) -> np.ndarray:
        X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValidationError(
                f"expected a 2-d matrix with {self.n_features} columns"
            )
        return X

    def tree_votes(self, X) -> np.ndarray:
        """(n_samples, n_trees) per-tree predictions."""
        X = self._check(X)
        return forest_tree_votes(
            X, self.feature, self.threshold, self.left, self.right,
            self.leaf_class,
        )

    def predict(self, X) -> np.ndarray:
        votes = self.tree_votes(X)
        return majority_vote(votes, self.n_classes, self.n_trees)

    def prefix(self, n_trees: int) -> "ForestModel":
        """The forest restricted to its first n_trees trees."""
        if not 1 <= n_trees <= self.n_trees:
            raise ValidationError(
                f"prefix size {n_trees} outside [1, {self.n_trees}]"
            )
        return ForestModel(
            feature=self.feature[:n_trees],
            threshold=self.threshold[:n_trees],
            left=self.left[:n_trees],
            right=self.right[:n_trees],
            leaf_class=self.leaf_class[:n_trees],
            n_nodes=self.n_nodes[:n_trees],
            n_classes=self.n_classes,
            n_features=self.n_features,
            n_trees=n_trees,
            max_depth=self.max_depth,
            seed=self.seed,
        )


def train_rfc(X, y, n_trees: int, max_depth: int, seed: int) -> ForestModel:
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
    if n_trees < 1:
        raise ValidationError(f"n_trees must be >= 1, got {n_trees}")
    if max_depth < 1:
        raise ValidationError(f"max_depth must be >= 1, got {max_depth}")
    if y.min() < 0:
        raise ValidationError("class labels must be non-negative integers")
    if np.unique(y).size < 2:
        raise ValidationError("training data contains fewer than two classes")
    n_classes = int(y.max()) + 1
    feature, threshold, left, right, leaf_class, n_nodes = fit_forest(
        X, y, n_classes, int(n_trees), int(max_depth),
        max_split_features(X.shape[1]), int(seed) & 0x7FFFFFFFFFFFFFFF,
    )
    return ForestModel(
        feature=feature, threshold=threshold, left=left, right=right,
        leaf_class=leaf_class, n_nodes=n_nodes, n_classes=n_classes,
        n_features=X.shape[1], n_trees=int(n_trees), max_depth=int(max_depth),
        seed=int(seed),
    )

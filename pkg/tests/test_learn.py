"""Classifier and grid-search tests.

The gradient checks compare analytic gradients against central finite
differences on 5-sample batches in float64. Relative error uses the
symmetric denominator max(1e-3, |a| + |b|) so coordinates whose true
gradient is ~0 do not blow the ratio up; the 1e-4 threshold then matches
the accuracy a second-order difference at h=1e-6 actually achieves.
"""

import numpy as np
import pytest

from conftest import make_clusters
from gaitbench.errors import ValidationError
from gaitbench.learn import nets
from gaitbench.learn._kernels import majority_vote
from gaitbench.learn.cnn import (CNN_LAYERS, CnnModel, _im2col,
                                 cnn_forward, cnn_loss_and_grads,
                                 conv_output_length, flattened_size,
                                 init_cnn_params, train_cnn)
from gaitbench.learn.forest import train_rfc
from gaitbench.learn.grid import (GRID_PRESETS, HyperGrid, _pick_best,
                                  grid_search, search_fold)
from gaitbench.learn.mlp import (init_mlp_params, mlp_loss_and_grads,
                                 train_mlp)
from gaitbench.learn.svm import SvmModel, train_svm
from gaitbench.evaluate import stratified_folds
from gaitbench.seeding import derive_seed


def central_diff_grads(loss_fn, params, indices, h=1e-6):
    """Finite-difference gradient at selected flat coordinates."""
    flat = nets.flatten_params(params)
    out = np.empty(len(indices), dtype=np.float64)
    for row, i in enumerate(indices):
        up = flat.copy()
        up[i] += h
        down = flat.copy()
        down[i] -= h
        out[row] = (
            loss_fn(nets.unflatten_params(up, params))
            - loss_fn(nets.unflatten_params(down, params))
        ) / (2.0 * h)
    return out


def relative_error(a, b):
    return np.abs(a - b) / np.maximum(1e-3, np.abs(a) + np.abs(b))


# ---------------------------------------------------------------------------
# SVM
# ---------------------------------------------------------------------------


class TestSvm:
    def test_two_separated_clusters_perfect_train_accuracy(self):
        X, y = make_clusters(n_classes=2, per_class=20, seed=1)
        model = train_svm(X, y, c=1.0)
        assert (model.predict(X) == y).mean() == 1.0

    def test_six_class_training(self):
        X, y = make_clusters(seed=2)
        model = train_svm(X, y, c=1.0)
        assert model.n_classes == 6
        assert model.weights.shape == (6, X.shape[1] + 1)
        assert (model.predict(X) == y).mean() == 1.0

    def test_retraining_is_bit_identical(self):
        X, y = make_clusters(seed=3)
        a = train_svm(X, y, c=0.5)
        b = train_svm(X, y, c=0.5)
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.decision_values(X), b.decision_values(X))

    def test_single_class_rejected(self):
        X = np.random.default_rng(0).normal(size=(10, 4))
        with pytest.raises(ValidationError):
            train_svm(X, np.zeros(10, dtype=int), c=1.0)

    @pytest.mark.parametrize("bad_c", [0.0, -1.0, np.nan, np.inf])
    def test_bad_penalty_rejected(self, bad_c):
        X, y = make_clusters(n_classes=2, per_class=5, seed=4)
        with pytest.raises(ValidationError):
            train_svm(X, y, c=bad_c)

    def test_non_finite_features_rejected(self):
        X, y = make_clusters(n_classes=2, per_class=5, seed=5)
        X[3, 2] = np.nan
        with pytest.raises(ValidationError):
            train_svm(X, y, c=1.0)

    def test_dual_objective_monotone_and_gap_met(self):
        # The stop rule is gap <= tol * max(1, |primal|); primal = dual + gap.
        X, y = make_clusters(seed=6, spread=0.8)
        model = train_svm(X, y, c=1.0)
        for duals, gaps in zip(model.dual_objectives, model.duality_gaps):
            diffs = np.diff(duals)
            assert (diffs >= -1e-9).all()
            assert gaps[-1] <= 1e-4 * max(1.0, abs(duals[-1] + gaps[-1]))

    def test_gap_is_absolute_small_on_scaled_data(self):
        # With features on the scale the pipeline feeds (order-1 columns)
        # the primal optimum sits below 1 and the recorded gap is itself
        # below the tolerance, not just below tolerance * primal.
        X, y = make_clusters(seed=6)
        model = train_svm(X, y, c=1.0)
        for gaps in model.duality_gaps:
            assert gaps[-1] < 1e-4

    def test_train_predictions_invariant_to_row_order(self):
        X, y = make_clusters(seed=7, spread=0.6)
        perm = np.random.default_rng(11).permutation(len(y))
        a = train_svm(X, y, c=1.0)
        b = train_svm(X[perm], y[perm], c=1.0)
        assert np.array_equal(a.predict(X), b.predict(X))

    def test_row_order_decision_values_within_tolerance(self):
        # The dual objective is row-order independent, so solving both
        # orders tightly pins the decision values to within 1e-6.
        X, y = make_clusters(seed=8, spread=0.6)
        perm = np.random.default_rng(12).permutation(len(y))
        a = train_svm(X, y, c=1.0, tol=1e-10)
        b = train_svm(X[perm], y[perm], c=1.0, tol=1e-10)
        delta = np.abs(a.decision_values(X) - b.decision_values(X)).max()
        assert delta <= 1e-6

    def test_prediction_tie_breaks_to_lowest_class(self):
        model = SvmModel(
            weights=np.zeros((6, 4)), n_classes=6, c=1.0,
            dual_objectives=(), duality_gaps=(),
        )
        pred = model.predict(np.ones((3, 3)))
        assert np.array_equal(pred, np.zeros(3, dtype=np.int64))

    def test_decision_values_validate_feature_count(self):
        X, y = make_clusters(n_classes=2, per_class=5, seed=9)
        model = train_svm(X, y, c=1.0)
        with pytest.raises(ValidationError):
            model.decision_values(np.ones((2, X.shape[1] + 1)))


# ---------------------------------------------------------------------------
# Random forest
# ---------------------------------------------------------------------------


def brute_force_best_stump_accuracy(X, y, n_classes):
    """Best training accuracy of any single-split tree with optimal
    per-side class assignment, found by exhaustive search."""
    best = 0.0
    n = len(y)
    for j in range(X.shape[1]):
        vals = np.unique(X[:, j])
        thresholds = (vals[:-1] + vals[1:]) / 2.0
        for t in thresholds:
            left = X[:, j] <= t
            left_hits = np.bincount(y[left], minlength=n_classes).max() if left.any() else 0
            right_hits = np.bincount(y[~left], minlength=n_classes).max() if (~left).any() else 0
            best = max(best, (left_hits + right_hits) / n)
    return best


def xor_data(seed=3, per_corner=25):
    rng = np.random.default_rng(seed)
    corners = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=float)
    X = np.repeat(corners, per_corner, axis=0)
    X += rng.uniform(-0.05, 0.05, size=X.shape)
    y = np.repeat([0, 0, 1, 1], per_corner)
    return X, y


class TestRandomForest:
    def test_six_clusters_high_train_accuracy(self):
        X, y = make_clusters(seed=10)
        model = train_rfc(X, y, n_trees=200, max_depth=8, seed=0)
        assert (model.predict(X) == y).mean() >= 0.95

    def test_seed_determinism(self):
        X, y = make_clusters(seed=11, spread=0.8)
        a = train_rfc(X, y, n_trees=30, max_depth=5, seed=9)
        b = train_rfc(X, y, n_trees=30, max_depth=5, seed=9)
        for name in ("feature", "threshold", "left", "right", "leaf_class", "n_nodes"):
            assert np.array_equal(getattr(a, name), getattr(b, name))
        assert np.array_equal(a.predict(X), b.predict(X))

    def test_different_seeds_differ(self):
        X, y = make_clusters(seed=11, spread=1.2)
        a = train_rfc(X, y, n_trees=30, max_depth=5, seed=1)
        b = train_rfc(X, y, n_trees=30, max_depth=5, seed=2)
        assert not np.array_equal(a.threshold, b.threshold)

    def test_depth_one_cannot_represent_xor(self):
        X, y = xor_data()
        stump_ceiling = brute_force_best_stump_accuracy(X, y, 2)
        assert stump_ceiling <= 0.75
        model = train_rfc(X, y, n_trees=50, max_depth=1, seed=3)
        assert (model.predict(X) == y).mean() <= 0.75

    def test_deep_forest_fits_xor(self):
        X, y = xor_data()
        model = train_rfc(X, y, n_trees=50, max_depth=4, seed=3)
        assert (model.predict(X) == y).mean() >= 0.95

    def test_prefix_matches_directly_trained_smaller_forest(self):
        # Tree t depends only on (seed, t), so truncating a big forest must
        # reproduce a small one bit for bit. Grid search relies on this.
        X, y = make_clusters(seed=12, spread=0.7)
        big = train_rfc(X, y, n_trees=20, max_depth=4, seed=21)
        small = train_rfc(X, y, n_trees=8, max_depth=4, seed=21)
        cut = big.prefix(8)
        for name in ("feature", "threshold", "left", "right", "leaf_class", "n_nodes"):
            assert np.array_equal(getattr(cut, name), getattr(small, name))
        assert np.array_equal(cut.predict(X), small.predict(X))

    def test_prefix_bounds(self):
        X, y = make_clusters(n_classes=2, per_class=10, seed=13)
        model = train_rfc(X, y, n_trees=5, max_depth=3, seed=0)
        with pytest.raises(ValidationError):
            model.prefix(0)
        with pytest.raises(ValidationError):
            model.prefix(6)

    def test_majority_vote_tie_breaks_to_lowest_class(self):
        votes = np.array([[0, 1], [2, 1], [4, 4]], dtype=np.int64)
        pred = majority_vote(votes, 6, 2)
        assert np.array_equal(pred, [0, 1, 4])

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_trees": 0, "max_depth": 3},
            {"n_trees": 5, "max_depth": 0},
        ],
    )
    def test_bad_shape_parameters_rejected(self, kwargs):
        X, y = make_clusters(n_classes=2, per_class=5, seed=14)
        with pytest.raises(ValidationError):
            train_rfc(X, y, seed=0, **kwargs)

    def test_single_class_rejected(self):
        X = np.random.default_rng(1).normal(size=(8, 3))
        with pytest.raises(ValidationError):
            train_rfc(X, np.ones(8, dtype=int), n_trees=5, max_depth=3, seed=0)


# ---------------------------------------------------------------------------
# MLP
# ---------------------------------------------------------------------------


class TestMlp:
    def test_separable_clusters_high_accuracy(self):
        X, y = make_clusters(seed=15, spread=0.25)
        model = train_mlp(X, y, alpha=1e-4, seed=0)
        assert (model.predict(X) == y).mean() >= 0.95

    def test_loss_trace_decreases(self):
        X, y = make_clusters(seed=15, spread=0.25)
        model = train_mlp(X, y, alpha=1e-4, seed=0)
        assert model.loss_trace.shape == (nets.N_ITERATIONS,)
        assert model.loss_trace[-1] < 0.05 * model.loss_trace[0]

    def test_retraining_is_bit_identical(self):
        X, y = make_clusters(seed=16)
        a = train_mlp(X, y, alpha=1e-3, seed=5, n_iterations=40)
        b = train_mlp(X, y, alpha=1e-3, seed=5, n_iterations=40)
        for pa, pb in zip(a.params, b.params):
            assert np.array_equal(pa, pb)
        assert np.array_equal(a.decision_values(X), b.decision_values(X))

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(17)
        X = rng.normal(size=(5, 7))
        y = np.array([0, 1, 2, 3, 4])
        params = init_mlp_params(7, 6, seed=1, dtype=np.float64)
        _, grads = mlp_loss_and_grads(params, X, y, 1e-2)
        analytic = nets.flatten_params(grads)
        indices = np.arange(analytic.size)
        fd = central_diff_grads(
            lambda p: mlp_loss_and_grads(p, X, y, 1e-2)[0], params, indices
        )
        assert relative_error(analytic, fd).max() < 1e-4

    def test_huge_alpha_drives_uniform_outputs(self):
        # Weights are penalised, biases are not: with the penalty cranked up
        # the logits collapse to the output bias, which balanced classes
        # drive to a constant, so the softmax lands on 1/6 everywhere.
        X, y = make_clusters(seed=18)
        model = train_mlp(X, y, alpha=1e6, seed=0)
        assert np.abs(model.params[2]).max() < 1e-3
        probs = nets.softmax(model.decision_values(X))
        assert np.abs(probs - 1.0 / 6.0).max() < 2e-3

    def test_single_class_rejected(self):
        X = np.random.default_rng(2).normal(size=(6, 3))
        with pytest.raises(ValidationError):
            train_mlp(X, np.zeros(6, dtype=int), alpha=1e-3, seed=0)

    def test_non_finite_rejected(self):
        X, y = make_clusters(n_classes=2, per_class=5, seed=19)
        X[0, 0] = np.inf
        with pytest.raises(ValidationError):
            train_mlp(X, y, alpha=1e-3, seed=0)

    def test_flatten_roundtrip(self):
        params = init_mlp_params(7, 6, seed=2, dtype=np.float32)
        flat = nets.flatten_params(params)
        back = nets.unflatten_params(flat, params)
        assert len(back) == len(params)
        for a, b in zip(params, back):
            assert a.shape == b.shape and a.dtype == b.dtype
            assert np.array_equal(a, b)


# ---------------------------------------------------------------------------
# CNN
# ---------------------------------------------------------------------------


def brute_force_conv(x, w, b, kernel, stride, pad):
    """Naive 1-d convolution; oracle for the im2col path."""
    n, c, length = x.shape
    filters = w.shape[0]
    padded = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    out_len = (length + 2 * pad - kernel) // stride + 1
    out = np.zeros((n, filters, out_len))
    for i in range(n):
        for f in range(filters):
            wf = w[f].reshape(c, kernel)
            for o in range(out_len):
                patch = padded[i, :, o * stride:o * stride + kernel]
                out[i, f, o] = (patch * wf).sum() + b[f]
    return out


class TestCnn:
    def test_layer_lengths_t101(self):
        lengths = []
        length = 101
        for _, kernel, stride, pad in CNN_LAYERS:
            length = conv_output_length(length, kernel, stride, pad)
            lengths.append(length)
        assert lengths == [51, 26, 9]
        assert flattened_size(6, 101) == 432

    def test_layer_lengths_t1001(self):
        assert flattened_size(6, 1001) == 48 * 84

    def test_conv_output_length_rejects_impossible(self):
        with pytest.raises(ValidationError):
            conv_output_length(1, 8, 2, 0)

    def test_im2col_matches_brute_force(self):
        rng = np.random.default_rng(20)
        x = rng.normal(size=(2, 3, 11))
        w = rng.normal(size=(4, 3 * 5))
        b = rng.normal(size=4)
        cols, out_len = _im2col(x, kernel=5, stride=2, pad=4)
        via_cols = (cols @ w.T + b).reshape(2, out_len, 4).transpose(0, 2, 1)
        naive = brute_force_conv(x, w, b, kernel=5, stride=2, pad=4)
        assert np.allclose(via_cols, naive, rtol=0, atol=1e-12)

    def test_forward_first_cols_shortcut_is_exact(self):
        rng = np.random.default_rng(21)
        x = rng.normal(size=(4, 2, 15))
        params = init_cnn_params(2, 15, 6, seed=0, dtype=np.float64)
        direct, _, _ = cnn_forward(params, x)
        cols = _im2col(x, CNN_LAYERS[0][1], CNN_LAYERS[0][2], CNN_LAYERS[0][3])
        shortcut, _, _ = cnn_forward(params, x, first_cols=cols)
        assert np.array_equal(direct, shortcut)

    def test_softmax_outputs_sum_to_one(self):
        X, y = make_clusters(n_features=22, seed=22)
        model = train_cnn(X, y, (2, 11), seed=0, dtype=np.float64,
                          n_iterations=5)
        probs = nets.softmax(model.decision_values(X))
        assert np.abs(probs.sum(axis=1) - 1.0).max() < 1e-9

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(23)
        x = rng.normal(size=(5, 1, 11))
        y = np.array([0, 1, 2, 3, 4])
        params = init_cnn_params(1, 11, 6, seed=2, dtype=np.float64)
        _, grads = cnn_loss_and_grads(params, x, y)
        analytic = nets.flatten_params(grads)
        # Spot-check a seeded sample of coordinates; the full stack has
        # ~16k parameters and the FD loop is quadratic in that.
        indices = np.random.default_rng(24).choice(
            analytic.size, size=300, replace=False
        )
        fd = central_diff_grads(
            lambda p: cnn_loss_and_grads(p, x, y)[0], params, indices
        )
        assert relative_error(analytic[indices], fd).max() < 1e-4

    def test_separable_waveforms_high_accuracy(self):
        X, y = make_clusters(n_features=66, seed=25, spread=0.25)
        model = train_cnn(X, y, (6, 11), seed=0)
        assert (model.predict(X) == y).mean() >= 0.90

    def test_retraining_is_bit_identical(self):
        X, y = make_clusters(n_features=22, seed=26)
        a = train_cnn(X, y, (2, 11), seed=4, n_iterations=30)
        b = train_cnn(X, y, (2, 11), seed=4, n_iterations=30)
        for pa, pb in zip(a.params, b.params):
            assert np.array_equal(pa, pb)

    def test_accepts_3d_and_flat_inputs(self):
        X, y = make_clusters(n_features=22, seed=27)
        model = train_cnn(X, y, (2, 11), seed=0, n_iterations=5)
        flat_pred = model.predict(X)
        cube_pred = model.predict(X.reshape(len(y), 2, 11))
        assert np.array_equal(flat_pred, cube_pred)

    def test_shape_mismatch_rejected(self):
        X, y = make_clusters(n_features=22, seed=28)
        with pytest.raises(ValidationError):
            train_cnn(X, y, (3, 11), seed=0, n_iterations=2)
        model = train_cnn(X, y, (2, 11), seed=0, n_iterations=2)
        with pytest.raises(ValidationError):
            model.predict(np.ones((2, 23)))


# ---------------------------------------------------------------------------
# Shared net machinery
# ---------------------------------------------------------------------------


class TestNets:
    def test_softmax_is_stable_for_large_logits(self):
        logits = np.array([[1e4, 1e4 - 5.0, 0.0]])
        probs = nets.softmax(logits)
        assert np.isfinite(probs).all()
        assert abs(probs.sum() - 1.0) < 1e-12
        assert probs[0, 0] > probs[0, 1] > probs[0, 2]

    def test_log_softmax_matches_naive_form(self):
        rng = np.random.default_rng(29)
        logits = rng.normal(size=(7, 6))
        naive = np.log(np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True))
        assert np.allclose(nets.log_softmax(logits), naive, atol=1e-12)

    def test_cross_entropy_matches_hand_computation(self):
        logits = np.array([[2.0, 0.0, -1.0], [0.5, 0.5, 0.5]])
        y = np.array([0, 2])
        loss, dlogits = nets.cross_entropy_and_dlogits(logits, y)
        p = nets.softmax(logits)
        expected = -(np.log(p[0, 0]) + np.log(p[1, 2])) / 2.0
        assert abs(loss - expected) < 1e-12
        onehot = np.zeros_like(p)
        onehot[np.arange(2), y] = 1.0
        assert np.allclose(dlogits, (p - onehot) / 2.0, atol=1e-12)

    def test_adam_first_step_is_signed_learning_rate(self):
        # After bias correction the first update is lr * g / (|g| + eps),
        # i.e. one learning rate in the direction opposite the gradient.
        param = np.zeros(3, dtype=np.float64)
        grad = np.array([2.0, -0.5, 1e-2])
        optimizer = nets.AdamOptimizer([param])
        optimizer.step([param], [grad])
        assert np.allclose(param, -nets.LEARNING_RATE * np.sign(grad), atol=1e-9)

    def test_he_normal_scale(self):
        rng = np.random.default_rng(30)
        w = nets.he_normal(rng, (4000, 50), fan_in=50, dtype=np.float64)
        assert abs(w.std() - np.sqrt(2.0 / 50.0)) < 0.01


# ---------------------------------------------------------------------------
# Hyperparameter grids and per-fold search
# ---------------------------------------------------------------------------


class TestHyperGrid:
    def test_paper_preset_sizes(self):
        grid = HyperGrid.paper()
        assert len(grid.svm_c) == 81
        assert len(grid.rfc_points) == 7 * 5
        assert len(grid.mlp_alpha) == 7

    def test_paper_svm_c_geometry(self):
        grid = HyperGrid.paper()
        assert grid.svm_c[0] == pytest.approx(2.0 ** -5)
        assert grid.svm_c[-1] == pytest.approx(2.0 ** 15)
        ratios = np.diff(np.log2(np.array(grid.svm_c)))
        assert np.allclose(ratios, 0.25, atol=1e-12)

    def test_paper_rfc_and_mlp_values(self):
        grid = HyperGrid.paper()
        trees = sorted({t for t, _ in grid.rfc_points})
        depths = sorted({d for _, d in grid.rfc_points})
        assert trees == [200, 225, 250, 275, 300, 325, 350]
        assert depths == [4, 5, 6, 7, 8]
        assert grid.mlp_alpha == tuple(10.0 ** -i for i in range(1, 8))

    def test_coarse_is_strict_subset_of_paper(self):
        paper = HyperGrid.paper()
        coarse = HyperGrid.coarse()
        assert set(coarse.svm_c) < set(paper.svm_c)
        assert set(coarse.rfc_points) < set(paper.rfc_points)
        assert set(coarse.mlp_alpha) < set(paper.mlp_alpha)
        assert len(coarse.svm_c) == 11
        assert len(coarse.rfc_points) == 9
        assert len(coarse.mlp_alpha) == 4

    def test_from_name(self):
        assert HyperGrid.from_name("paper").name == "paper"
        assert HyperGrid.from_name("coarse").name == "coarse"
        assert GRID_PRESETS == ("paper", "coarse")
        with pytest.raises(ValidationError):
            HyperGrid.from_name("fine")

    def test_points_per_classifier(self):
        grid = HyperGrid.coarse()
        assert grid.points("svm") == tuple({"C": c} for c in grid.svm_c)
        assert grid.points("cnn") == ({},)
        assert all(set(p) == {"n_trees", "max_depth"} for p in grid.points("rfc"))
        with pytest.raises(ValidationError):
            grid.points("knn")


def tiny_grid():
    return HyperGrid(
        name="tiny", svm_c=(1.0,), rfc_points=((12, 4),), mlp_alpha=(1e-3,)
    )


class TestSearchFold:
    def split(self, seed=31, spread=0.5):
        """One validation trial per class, mirroring the fold protocol;
        macro F1 needs every class present to reach 1.0."""
        X, y = make_clusters(seed=seed, spread=spread)
        rng = np.random.default_rng(seed)
        val = []
        for c in range(6):
            members = np.flatnonzero(y == c)
            val.append(rng.choice(members))
        val = np.array(val)
        train = np.setdiff1d(np.arange(len(y)), val)
        return X, y, train, val

    def test_tie_picks_first_grid_point(self):
        assert _pick_best([({"C": 1}, 0.5), ({"C": 2}, 0.5), ({"C": 3}, 0.3)]) == 0
        # On cleanly separable data every C validates perfectly, so the tie
        # rule must surface the first point of the sweep.
        X, y, train, val = self.split(spread=0.05)
        result = search_fold(
            "svm", 0, X[train], y[train], X[val], y[val],
            HyperGrid.coarse(), seed=0,
        )
        assert result.best_val_f1 == 1.0
        assert result.best_params == {"C": HyperGrid.coarse().svm_c[0]}

    def test_selected_point_is_validation_argmax(self):
        X, y, train, val = self.split(seed=32, spread=1.5)
        result = search_fold(
            "svm", 3, X[train], y[train], X[val], y[val],
            HyperGrid.coarse(), seed=0,
        )
        scores = [f1 for _, f1 in result.evaluations]
        assert result.best_val_f1 == max(scores)
        assert result.best_params == result.evaluations[int(np.argmax(scores))][0]
        assert len(result.evaluations) == 11

    def test_size_one_svm_grid_equals_direct_training(self):
        X, y, train, val = self.split(seed=33)
        result = search_fold(
            "svm", 2, X[train], y[train], X[val], y[val], tiny_grid(), seed=7
        )
        direct = train_svm(X[train], y[train], c=1.0)
        assert np.array_equal(result.model.weights, direct.weights)

    def test_size_one_rfc_grid_equals_direct_training(self):
        X, y, train, val = self.split(seed=34)
        result = search_fold(
            "rfc", 5, X[train], y[train], X[val], y[val], tiny_grid(), seed=7
        )
        direct = train_rfc(
            X[train], y[train], n_trees=12, max_depth=4,
            seed=derive_seed(7, "fold", 5),
        )
        for name in ("feature", "threshold", "left", "right", "leaf_class"):
            assert np.array_equal(getattr(result.model, name), getattr(direct, name))

    def test_size_one_mlp_grid_equals_direct_training(self):
        X, y, train, val = self.split(seed=35)
        result = search_fold(
            "mlp", 1, X[train], y[train], X[val], y[val], tiny_grid(), seed=7
        )
        direct = train_mlp(
            X[train], y[train], alpha=1e-3, seed=derive_seed(7, "fold", 1)
        )
        for pa, pb in zip(result.model.params, direct.params):
            assert np.array_equal(pa, pb)

    def test_rfc_winner_matches_direct_retrain(self):
        # The search reuses one big forest per depth and truncates; the
        # returned winner must equal an honest retrain at the chosen point.
        X, y, train, val = self.split(seed=36, spread=1.8)
        result = search_fold(
            "rfc", 4, X[train], y[train], X[val], y[val],
            HyperGrid.coarse(), seed=9,
        )
        direct = train_rfc(
            X[train], y[train],
            n_trees=result.best_params["n_trees"],
            max_depth=result.best_params["max_depth"],
            seed=derive_seed(9, "fold", 4),
        )
        assert np.array_equal(result.model.predict(X), direct.predict(X))
        for name in ("feature", "threshold", "left", "right", "leaf_class"):
            assert np.array_equal(getattr(result.model, name), getattr(direct, name))

    def test_cnn_has_single_implicit_point(self):
        X, y, train, val = self.split(seed=37)
        result = search_fold(
            "cnn", 0, X[train], y[train], X[val], y[val], tiny_grid(),
            seed=7, cnn_shape=(1, 8),
        )
        assert result.best_params == {}
        assert len(result.evaluations) == 1
        assert isinstance(result.model, CnnModel)

    def test_cnn_requires_shape(self):
        X, y, train, val = self.split(seed=38)
        with pytest.raises(ValidationError):
            search_fold(
                "cnn", 0, X[train], y[train], X[val], y[val], tiny_grid(), seed=7
            )

    def test_unknown_classifier_rejected(self):
        X, y, train, val = self.split(seed=39)
        with pytest.raises(ValidationError):
            search_fold(
                "lda", 0, X[train], y[train], X[val], y[val], tiny_grid(), seed=7
            )

    def test_grid_search_runs_every_fold(self):
        X, y = make_clusters(seed=40, spread=0.3)
        labels = y + 1
        folds = stratified_folds(labels, seed=5)
        results = grid_search("svm", X, y, folds, tiny_grid(), seed=3)
        assert [r.fold_index for r in results] == list(range(15))
        assert all(r.best_val_f1 == 1.0 for r in results)
        assert all(r.seconds >= 0.0 for r in results)

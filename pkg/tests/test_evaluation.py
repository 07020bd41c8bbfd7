import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adgcl_lab.datasets import MotifSpec, RegressionSpec, generate_planted_motif, generate_regression_degree_target
from adgcl_lab.evaluation import (
    L2_GRID,
    ProbeError,
    ProbeResult,
    Standardizer,
    evaluate_encoder,
    fit_logistic,
    kfold_indices,
    kfold_probe,
    labels_of,
    logistic_probe,
    probe_split,
    resolve_probe,
    ridge_probe,
    ridge_solve,
    ridge_system,
    roc_auc,
    write_metrics_csv,
)
from adgcl_lab.graphs import split_dataset
from adgcl_lab.params import init_encoder


def auc_oracle(scores, labels):
    """Pairwise definition: P(pos > neg) + 0.5 P(tie)."""
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    total = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg)
    return total / (len(pos) * len(neg))


class TestRidge:
    def test_two_points_without_intercept(self):
        w, b = ridge_solve([[1.0], [2.0]], [1.0, 2.0], 1.0, fit_intercept=False)
        assert w[0] == pytest.approx(5 / 6, abs=1e-12)
        assert b == 0.0

    def test_two_points_with_free_bias(self):
        # centred data: Sxy = Sxx = 0.5, so w = 0.5 / 1.5 and b = ybar - w * xbar
        w, b = ridge_solve([[1.0], [2.0]], [1.0, 2.0], 1.0)
        assert w[0] == pytest.approx(1 / 3, abs=1e-12)
        assert b == pytest.approx(1.0, abs=1e-12)

    def test_identity_features_small_penalty(self, rng):
        y = rng.normal(size=20)
        X = y.reshape(-1, 1)
        w, b = ridge_solve(X, y, 1e-9)
        assert w[0] == pytest.approx(1.0, abs=1e-6)
        assert abs(b) < 1e-6

    def test_constant_target_is_all_bias(self, rng):
        X = rng.normal(size=(30, 4))
        w, b = ridge_solve(X, np.full(30, 3.0), 1.0)
        assert np.max(np.abs(w)) < 1e-12
        assert b == pytest.approx(3.0, abs=1e-12)

    def test_normal_equation_residual(self, rng):
        for l2 in L2_GRID:
            X, y = rng.normal(size=(50, 6)), rng.normal(size=50)
            lhs, rhs = ridge_system(X, y, l2)
            w, b = ridge_solve(X, y, l2)
            theta = np.append(w, b)
            assert np.linalg.norm(lhs @ theta - rhs) < 1e-8

    def test_bias_is_not_penalised(self):
        lhs, _ = ridge_system(np.eye(3), np.ones(3), 10.0)
        assert lhs[-1, -1] == 3.0

    def test_positive_l2_required(self):
        with pytest.raises(ProbeError):
            ridge_solve(np.ones((3, 1)), np.ones(3), 0.0)

    def test_probe_selects_best_and_reports_mae(self, rng):
        X = rng.normal(size=(60, 3))
        y = (X @ np.array([1.0, -2.0, 0.5]) + 0.1 * rng.normal(size=60)).reshape(-1, 1)
        res = ridge_probe(X[:40], y[:40], X[40:50], y[40:50], X[50:], y[50:])
        assert res.metric_name == "rmse"
        assert res.best_l2 in L2_GRID
        assert res.test_metric < 0.5
        assert 0 <= res.extra["mae"] <= res.test_metric + 1e-12
        for l2 in L2_GRID:
            w, b = ridge_solve(X[:40], y[:40], l2)
            assert res.val_metric <= np.sqrt(np.mean((X[40:50] @ w + b - y[40:50]) ** 2)) + 1e-12


class TestRocAuc:
    def test_perfect_and_reversed(self):
        assert roc_auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
        assert roc_auc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0

    def test_all_tied(self):
        assert roc_auc([0.5] * 6, [0, 1, 0, 1, 1, 0]) == 0.5

    def test_single_class(self):
        with pytest.raises(ProbeError):
            roc_auc([0.1, 0.2], [1, 1])

    def test_matches_pairwise_oracle(self, rng):
        for _ in range(20):
            s = rng.integers(0, 5, size=15).astype(float)
            y = rng.integers(0, 2, size=15)
            if y.min() == y.max():
                continue
            assert roc_auc(s, y) == pytest.approx(auc_oracle(s, y), abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_monotone_transform_invariance(self, seed):
        r = np.random.default_rng(seed)
        s = r.normal(size=12)
        y = np.array([0, 1] * 6)
        assert roc_auc(np.exp(3 * s) + 1, y) == pytest.approx(roc_auc(s, y), abs=1e-12)


class TestLogistic:
    def test_separable(self, rng):
        X = np.concatenate([rng.normal(-3, 0.5, size=(30, 2)), rng.normal(3, 0.5, size=(30, 2))])
        y = np.array([0] * 30 + [1] * 30)
        perm = rng.permutation(60)
        X, y = X[perm], y[perm]
        res = logistic_probe(X[:40], y[:40], X[40:50], y[40:50], X[50:], y[50:])
        assert res.test_metric == 1.0
        assert res.extra["roc_auc"] == 1.0

    def test_random_labels_near_chance(self):
        accs = []
        for seed in range(20):
            r = np.random.default_rng(seed)
            X, y = r.normal(size=(80, 4)), r.integers(0, 2, size=80)
            accs.append(logistic_probe(X[:40], y[:40], X[40:60], y[40:60], X[60:], y[60:], iterations=100).test_metric)
        assert abs(np.mean(accs) - 0.5) <= 0.1

    def test_loss_is_monotone(self, rng):
        X = rng.normal(size=(50, 3))
        y = (X[:, 0] + rng.normal(size=50) > 0).astype(float)
        for l2 in (0.01, 1.0, 100.0):
            fit = fit_logistic(X, y, l2, iterations=200)
            assert np.all(np.diff(fit.losses) <= 1e-12)

    def test_starts_at_log_two(self, rng):
        fit = fit_logistic(rng.normal(size=(10, 2)), np.array([0, 1] * 5), 1.0, iterations=1)
        assert fit.losses[0] == pytest.approx(np.log(2), abs=1e-9)

    def test_single_class_training_split(self, rng):
        X = rng.normal(size=(9, 2))
        y = np.zeros(9, dtype=int)
        with pytest.raises(ProbeError):
            logistic_probe(X[:3], y[:3], X[3:6], y[3:6], X[6:], y[6:])

    def test_multiclass(self, rng):
        centers = np.array([[0, 4], [4, 0], [-4, -4]])
        y = np.repeat([0, 1, 2], 20)
        X = centers[y] + 0.3 * rng.normal(size=(60, 2))
        perm = rng.permutation(60)
        X, y = X[perm], y[perm]
        res = logistic_probe(X[:40], y[:40], X[40:50], y[40:50], X[50:], y[50:])
        assert res.test_metric == 1.0
        assert "roc_auc" not in res.extra

    def test_first_best_in_grid_order(self, rng):
        X = np.concatenate([rng.normal(-3, 0.5, size=(20, 2)), rng.normal(3, 0.5, size=(20, 2))])
        y = np.array([0] * 20 + [1] * 20)
        perm = rng.permutation(40)
        X, y = X[perm], y[perm]
        res = logistic_probe(X[:20], y[:20], X[20:30], y[20:30], X[30:], y[30:], iterations=50)
        assert res.best_l2 == L2_GRID[0]


class TestGridAndProtocol:
    @pytest.mark.parametrize("grid", [(), (0.0, 1.0), (-1.0,)])
    def test_bad_grid(self, grid, rng):
        X, y = rng.normal(size=(9, 2)), rng.normal(size=9)
        with pytest.raises(ProbeError):
            ridge_probe(X[:3], y[:3], X[3:6], y[3:6], X[6:], y[6:], grid=grid)

    def test_single_entry_grid_matches_direct_fit(self, rng):
        X, y = rng.normal(size=(30, 3)), rng.normal(size=30)
        res = ridge_probe(X[:20], y[:20], X[20:25], y[20:25], X[25:], y[25:], grid=(0.5,))
        w, b = ridge_solve(X[:20], y[:20], 0.5)
        assert res.best_l2 == 0.5
        assert res.test_metric == pytest.approx(np.sqrt(np.mean((X[25:] @ w + b - y[25:]) ** 2)), abs=1e-15)

    def test_test_labels_do_not_affect_selection(self, rng):
        X, y = rng.normal(size=(40, 3)), rng.normal(size=40)
        a = ridge_probe(X[:25], y[:25], X[25:32], y[25:32], X[32:], y[32:])
        b = ridge_probe(X[:25], y[:25], X[25:32], y[25:32], X[32:], rng.normal(size=8))
        assert a.best_l2 == b.best_l2 and a.val_metric == b.val_metric

    def test_standardizer_uses_train_rows(self, rng):
        X = rng.normal(3.0, 2.0, size=(50, 3))
        X[:, 2] = 7.0
        Z = Standardizer(X)(X)
        np.testing.assert_allclose(Z.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(Z[:, :2].std(axis=0), 1.0, atol=1e-12)
        assert np.all(Z[:, 2] == 0.0)

    def test_resolve_probe(self):
        f, i = np.zeros(3), np.zeros(3, dtype=np.int64)
        assert resolve_probe("auto", f) == "ridge"
        assert resolve_probe("auto", i) == "logistic"
        with pytest.raises(ProbeError):
            resolve_probe("logistic", f)
        with pytest.raises(ProbeError):
            resolve_probe("ridge", i)
        with pytest.raises(ProbeError):
            resolve_probe("svm", i)

    def test_kfold_indices_partition(self):
        splits = kfold_indices(53, 10, seed=2)
        tests = [set(s.test) for s in splits]
        assert set().union(*tests) == set(range(53))
        assert sum(len(t) for t in tests) == 53
        for s in splits:
            assert set(s.train) | set(s.val) | set(s.test) == set(range(53))
            assert not (set(s.train) & set(s.val)) and not (set(s.val) & set(s.test))
        with pytest.raises(ProbeError):
            kfold_indices(5, 10)

    def test_kfold_probe(self, rng):
        X = rng.normal(size=(40, 2))
        y = X @ np.array([1.0, 2.0])
        results, mean, std = kfold_probe(X, y, folds=4, seed=0)
        assert len(results) == 4
        assert mean == pytest.approx(np.mean([r.test_metric for r in results]))
        assert std >= 0.0

    def test_metrics_csv_rows(self, tmp_path):
        res = ProbeResult(0.1, 0.9, 0.8, "accuracy", {"roc_auc": 0.85, "train_loss_monotone": 1.0})
        write_metrics_csv(res.rows(seed=3), tmp_path / "m.csv")
        lines = (tmp_path / "m.csv").read_text().splitlines()
        assert lines[0] == "metric,split,value,l2,seed,fold"
        assert lines[1:] == ["accuracy,val,0.9,0.1,3,", "accuracy,test,0.8,0.1,3,", "roc_auc,test,0.85,0.1,3,"]


class TestEndToEnd:
    def test_classification_dataset(self):
        data = generate_planted_motif(40, 0, MotifSpec(min_nodes=6, max_nodes=9))
        y = labels_of(data)
        assert y.dtype == np.int64
        res = evaluate_encoder(init_encoder(data[0].node_feat.shape[1], 8, 2), data, split_dataset(40))
        assert res.metric_name == "accuracy" and 0.0 <= res.test_metric <= 1.0

    def test_regression_dataset(self):
        data = generate_regression_degree_target(40, 0, RegressionSpec(min_nodes=6, max_nodes=9))
        y = labels_of(data)
        assert y.shape == (40, 1)
        X = np.random.default_rng(0).normal(size=(40, 3))
        res = probe_split(X, y, split_dataset(40))
        assert res.metric_name == "rmse" and np.isfinite(res.test_metric)

"""Linear probes on frozen graph embeddings.

Ridge regression is solved in closed form.  The logistic probe is plain
full-batch gradient descent driven by the tape, with a step size of 1/L
(L = smoothness constant of the mean loss), so the training loss never
increases.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .encoder import encode
from .graphs import DatasetSplit, Graph, make_batch
from .params import EncoderParams
from .tensor import Tape, Tensor, backward, expand_rows, log, matmul, mean, sigmoid, tsum

L2_GRID = (0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0)
METRICS = ("accuracy", "roc_auc", "rmse", "mae")


class ProbeError(ValueError):
    pass


@dataclass
class ProbeResult:
    best_l2: float
    val_metric: float
    test_metric: float
    metric_name: str
    extra: dict = field(default_factory=dict)

    def rows(self, seed: int = 0, fold: int | str = "") -> list[list]:
        out = [
            [self.metric_name, "val", repr(self.val_metric), repr(self.best_l2), seed, fold],
            [self.metric_name, "test", repr(self.test_metric), repr(self.best_l2), seed, fold],
        ]
        for name, value in self.extra.items():
            if name not in METRICS:
                continue
            out.append([name, "test", repr(value), repr(self.best_l2), seed, fold])
        return out


METRIC_HEADER = ("metric", "split", "value", "l2", "seed", "fold")


def write_metrics_csv(rows: Sequence[Sequence], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_HEADER)
        w.writerows(rows)


def embed_dataset(params: EncoderParams, dataset: Sequence[Graph], chunk: int = 256) -> np.ndarray:
    """Encoder output (no projection head) for every graph, unaugmented."""
    parts = []
    for i in range(0, len(dataset), chunk):
        parts.append(encode(make_batch(dataset[i : i + chunk]), params).numpy())
    return np.concatenate(parts, axis=0)


def _check_grid(grid) -> tuple[float, ...]:
    grid = tuple(float(g) for g in grid)
    if not grid or any(g <= 0 for g in grid):
        raise ProbeError("l2 grid must be non-empty and strictly positive")
    return grid


class Standardizer:
    """z-scoring fitted on training rows only; constant columns pass through centred."""

    def __init__(self, X: np.ndarray):
        self.mu = X.mean(axis=0)
        sd = X.std(axis=0)
        self.sd = np.where(sd > 1e-12, sd, 1.0)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mu) / self.sd


# ---------------------------------------------------------------------------
# ridge


def ridge_system(X: np.ndarray, y: np.ndarray, l2: float, fit_intercept: bool = True):
    """Normal equations ``(A^T A + l2 D) theta = A^T y`` with the bias unpenalised."""
    X = np.asarray(X, dtype=np.float64)
    if fit_intercept:
        A = np.hstack([X, np.ones((X.shape[0], 1))])
        D = np.eye(A.shape[1])
        D[-1, -1] = 0.0
    else:
        A = X
        D = np.eye(A.shape[1])
    return A.T @ A + l2 * D, A.T @ np.asarray(y, dtype=np.float64)


def ridge_solve(X, y, l2: float, fit_intercept: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Returns ``(w, b)``; ``b`` is zero when ``fit_intercept`` is off."""
    if l2 <= 0:
        raise ProbeError("ridge needs l2 > 0")
    y = np.asarray(y, dtype=np.float64)
    lhs, rhs = ridge_system(X, y, l2, fit_intercept)
    theta = np.linalg.solve(lhs, rhs)
    if fit_intercept:
        return theta[:-1], theta[-1]
    return theta, np.zeros(theta.shape[1:]) if theta.ndim > 1 else np.float64(0.0)


def _rmse(pred, y) -> float:
    return float(np.sqrt(np.mean((np.asarray(pred) - np.asarray(y)) ** 2)))


def _mae(pred, y) -> float:
    return float(np.mean(np.abs(np.asarray(pred) - np.asarray(y))))


def ridge_probe(
    X_train, y_train, X_val, y_val, X_test, y_test, grid=L2_GRID, standardize: bool = False
) -> ProbeResult:
    """Pick l2 by validation RMSE, then report test RMSE (and MAE in ``extra``)."""
    grid = _check_grid(grid)
    X_train, X_val, X_test = (np.asarray(a, dtype=np.float64) for a in (X_train, X_val, X_test))
    if standardize:
        sc = Standardizer(X_train)
        X_train, X_val, X_test = sc(X_train), sc(X_val), sc(X_test)
    best = None
    for l2 in grid:
        w, b = ridge_solve(X_train, y_train, l2)
        score = _rmse(X_val @ w + b, y_val)
        if best is None or score < best[0]:
            best = (score, l2, w, b)
    score, l2, w, b = best
    # test labels are only read here, after selection
    pred = X_test @ w + b
    return ProbeResult(l2, score, _rmse(pred, y_test), "rmse", {"mae": _mae(pred, y_test)})


# ---------------------------------------------------------------------------
# logistic


@dataclass
class LogisticFit:
    w: np.ndarray
    b: float
    losses: list[float]


def _logistic_loss(Xt: Tensor, y: np.ndarray, w: Tensor, b: Tensor, l2: float) -> Tensor:
    """Mean log-loss plus ``l2 / (2n) * ||w||^2`` (sklearn's C = 1 / l2, scaled by 1/n)."""
    n = Xt.shape[0]
    logits = matmul(Xt, w) + expand_rows(b, n)
    prob = sigmoid(logits)
    eps = 1e-12
    yt = Tensor._wrap(y.reshape(-1, 1))
    ll = yt * log(prob + eps) + (1.0 - yt) * log((1.0 - prob) + eps)
    return -mean(ll) + tsum(w * w) * (l2 / (2.0 * n))


def fit_logistic(X, y, l2: float, iterations: int = 500) -> LogisticFit:
    """Binary logistic regression by gradient descent from zero weights."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n, d = X.shape
    A = np.hstack([X, np.ones((n, 1))])
    smooth = np.linalg.eigvalsh(A.T @ A / n).max() / 4.0 + l2 / n
    step = 1.0 / smooth
    w = np.zeros((d, 1))
    b = np.zeros((1, 1))
    Xt = Tensor._wrap(X)
    losses = []
    for _ in range(iterations):
        with Tape() as tape:
            wt, bt = tape.watch(w), tape.watch(b)
            loss = _logistic_loss(Xt, y, wt, bt, l2)
        grads = backward(tape, loss)
        losses.append(float(loss.data))
        w = w - step * grads[wt.tape_id]
        b = b - step * grads[bt.tape_id]
    losses.append(float(_logistic_loss(Xt, y, Tensor._wrap(w), Tensor._wrap(b), l2).data))
    return LogisticFit(w.reshape(-1), float(b.reshape(())), losses)


def _scores(fits: list[LogisticFit], X: np.ndarray) -> np.ndarray:
    return np.stack([X @ f.w + f.b for f in fits], axis=1)


def roc_auc(scores, labels) -> float:
    """P(score_pos > score_neg) + 0.5 P(tie), via average ranks."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ProbeError("roc_auc needs both classes present")
    ranks = rankdata(scores, method="average")
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def logistic_probe(
    X_train,
    y_train,
    X_val,
    y_val,
    X_test,
    y_test,
    grid=L2_GRID,
    standardize: bool = True,
    iterations: int = 500,
) -> ProbeResult:
    """Pick l2 by validation accuracy (first best in grid order), report test accuracy.

    Binary tasks also report test ROC-AUC in ``extra``; multiclass tasks use
    one-vs-rest with ties broken toward the lowest class index.
    """
    grid = _check_grid(grid)
    y_train = np.asarray(y_train, dtype=np.int64).reshape(-1)
    y_val = np.asarray(y_val, dtype=np.int64).reshape(-1)
    X_train, X_val, X_test = (np.asarray(a, dtype=np.float64) for a in (X_train, X_val, X_test))
    classes = np.unique(y_train)
    if classes.size < 2:
        raise ProbeError("logistic probe needs at least two classes in the training split")
    if standardize:
        sc = Standardizer(X_train)
        X_train, X_val, X_test = sc(X_train), sc(X_val), sc(X_test)
    binary = classes.size == 2
    targets = [classes[1]] if binary else list(classes)

    def predict(fits, X):
        s = _scores(fits, X)
        if binary:
            return np.where(s[:, 0] > 0, classes[1], classes[0]), s[:, 0]
        return classes[np.argmax(s, axis=1)], s

    best = None
    for l2 in grid:
        fits = [fit_logistic(X_train, (y_train == c).astype(float), l2, iterations) for c in targets]
        acc = float(np.mean(predict(fits, X_val)[0] == y_val))
        if best is None or acc > best[0]:
            best = (acc, l2, fits)
    acc, l2, fits = best
    y_test = np.asarray(y_test, dtype=np.int64).reshape(-1)
    pred, score = predict(fits, X_test)
    extra = {}
    if binary and np.unique(y_test).size == 2:
        extra["roc_auc"] = roc_auc(score, (y_test == classes[1]).astype(int))
    extra["train_loss_monotone"] = float(
        all(np.all(np.diff(f.losses) <= 1e-12 * (1 + abs(f.losses[0]))) for f in fits)
    )
    return ProbeResult(l2, acc, float(np.mean(pred == y_test)), "accuracy", extra)


# ---------------------------------------------------------------------------
# dataset-level drivers


def labels_of(dataset: Sequence[Graph]) -> np.ndarray:
    labels = [g.label for g in dataset]
    if any(lab is None for lab in labels):
        raise ProbeError("every graph needs a label for probing")
    if all(isinstance(lab, tuple) for lab in labels):
        return np.array(labels, dtype=np.float64)
    if all(isinstance(lab, int) for lab in labels):
        return np.array(labels, dtype=np.int64)
    raise ProbeError("mixed label types")


def resolve_probe(probe: str, y: np.ndarray) -> str:
    task = "ridge" if y.dtype.kind == "f" else "logistic"
    if probe == "auto":
        return task
    if probe not in ("ridge", "logistic"):
        raise ProbeError(f"probe must be 'ridge', 'logistic' or 'auto', got {probe!r}")
    if probe == "logistic" and task == "ridge":
        raise ProbeError("logistic probe requested on a regression dataset")
    if probe == "ridge" and task == "logistic":
        raise ProbeError("ridge probe requested on a classification dataset")
    return probe


def probe_split(
    X: np.ndarray,
    y: np.ndarray,
    split: DatasetSplit,
    probe: str = "auto",
    grid=L2_GRID,
    standardize: bool | None = None,
) -> ProbeResult:
    probe = resolve_probe(probe, y)
    tr, va, te = (np.asarray(s, dtype=np.int64) for s in (split.train, split.val, split.test))
    args = (X[tr], y[tr], X[va], y[va], X[te], y[te], grid)
    if probe == "ridge":
        return ridge_probe(*args, standardize=bool(standardize))
    return logistic_probe(*args, standardize=True if standardize is None else standardize)


def evaluate_encoder(
    params: EncoderParams,
    dataset: Sequence[Graph],
    split: DatasetSplit,
    probe: str = "auto",
    grid=L2_GRID,
    standardize: bool | None = None,
) -> ProbeResult:
    return probe_split(embed_dataset(params, dataset), labels_of(dataset), split, probe, grid, standardize)


def validation_metric(params, dataset, split, probe: str = "auto") -> tuple[str, float]:
    res = evaluate_encoder(params, dataset, split, probe)
    return res.metric_name, res.val_metric


def kfold_indices(n: int, folds: int = 10, seed: int = 0) -> list[DatasetSplit]:
    """Fold k is the test set, fold k+1 the validation set, the rest train."""
    if folds < 3 or n < folds:
        raise ProbeError("need folds >= 3 and at least one item per fold")
    perm = np.random.default_rng(seed).permutation(n)
    parts = np.array_split(perm, folds)
    out = []
    for k in range(folds):
        test = parts[k]
        val = parts[(k + 1) % folds]
        train = np.concatenate([parts[j] for j in range(folds) if j not in (k, (k + 1) % folds)])
        out.append(DatasetSplit(tuple(train.tolist()), tuple(val.tolist()), tuple(test.tolist())))
    return out


def kfold_probe(X, y, folds: int = 10, seed: int = 0, probe: str = "auto", grid=L2_GRID):
    """Probe once per fold; returns (per-fold results, mean test metric, std)."""
    results = [probe_split(X, y, s, probe, grid) for s in kfold_indices(len(y), folds, seed)]
    vals = np.array([r.test_metric for r in results])
    return results, float(vals.mean()), float(vals.std())

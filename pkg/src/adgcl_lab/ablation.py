"""Method comparisons on shared splits: AD-GCL, uniform-drop NAD-GCL, untrained RU and InfoMax.

Method names:

``adgcl-fix``      adversarial training at ``config.lambda_reg``
``adgcl-opt``      adversarial training, lambda picked on validation from ``LAMBDA_GRID``
``nadgcl-fix``     uniform dropping at the saddle-point drop ratio of ``adgcl-fix`` (same seed)
``nadgcl-opt``     uniform dropping, ratio picked on validation from ``DROP_GRID``
``nadgcl:<r>``     uniform dropping at ratio ``r``
``ru``             randomly initialized, untrained encoder
``infomax``        no augmentation
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .evaluation import embed_dataset, kfold_indices, labels_of, probe_split, resolve_probe
from .graphs import DatasetSplit, Graph, split_dataset
from .training import LAMBDA_GRID, TrainConfig, init_models, train

log = logging.getLogger(__name__)

BASE_METHODS = ("adgcl-fix", "adgcl-opt", "nadgcl-fix", "nadgcl-opt", "ru", "infomax")
DROP_GRID = tuple(round(0.1 * k, 1) for k in range(1, 10))
DEFAULT_SEEDS = (0, 1, 2, 3, 4)
# fixed ratios must lie strictly inside (0, 1)
RATIO_CLIP = (0.01, 0.99)


def parse_method(name: str) -> tuple[str, float | None]:
    """Split ``nadgcl:<r>`` into its ratio; other names pass through unchanged."""
    if name in BASE_METHODS:
        return name, None
    if name.startswith("nadgcl:"):
        try:
            r = float(name.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad drop ratio in method {name!r}") from None
        if not 0.0 < r < 1.0:
            raise ValueError(f"drop ratio in {name!r} must be in (0, 1)")
        return "nadgcl", r
    raise ValueError(f"unknown method {name!r}; expected one of {BASE_METHODS} or 'nadgcl:<ratio>'")


@dataclass
class Protocol:
    """How embeddings are scored: one shared split per seed, or k folds per seed."""

    kind: str = "split"
    split_ratios: tuple = (0.8, 0.1, 0.1)
    folds: int = 10
    probe: str = "auto"

    def splits(self, n: int, seed: int) -> list[DatasetSplit]:
        if self.kind == "split":
            return [split_dataset(n, self.split_ratios, seed)]
        if self.kind == "kfold":
            return kfold_indices(n, self.folds, seed)
        raise ValueError(f"protocol must be 'split' or 'kfold', got {self.kind!r}")


@dataclass
class RunScore:
    method: str
    seed: int
    val_metric: float
    test_metric: float
    metric_name: str
    selected: str = ""
    drop_ratio: float | None = None


@dataclass
class MethodSummary:
    method: str
    metric_name: str
    mean: float
    std: float
    runs: list[RunScore]
    rank: int = 0


@dataclass
class ComparisonReport:
    summaries: list[MethodSummary]
    metadata: dict = field(default_factory=dict)

    RUN_HEADER = ("method", "seed", "metric", "val", "test", "selected")
    SUMMARY_HEADER = ("method", "metric", "mean", "std", "seeds", "rank")

    def summary(self, method: str) -> MethodSummary:
        for s in self.summaries:
            if s.method == method:
                return s
        raise KeyError(method)

    def means(self) -> dict[str, float]:
        return {s.method: s.mean for s in self.summaries}

    def ranking(self) -> list[str]:
        return [s.method for s in sorted(self.summaries, key=lambda s: s.rank)]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.RUN_HEADER)
            for s in self.summaries:
                for r in s.runs:
                    w.writerow([r.method, r.seed, r.metric_name, repr(r.val_metric), repr(r.test_metric), r.selected])

    def write_summary_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.SUMMARY_HEADER)
            for s in self.summaries:
                w.writerow([s.method, s.metric_name, repr(s.mean), repr(s.std), len(s.runs), s.rank])

    def text_table(self) -> str:
        width = max(len("method"), *(len(s.method) for s in self.summaries))
        lines = [f"{'method':<{width}}  {'metric':<8}  {'mean':>8}  {'std':>8}  rank"]
        for s in sorted(self.summaries, key=lambda s: s.rank):
            lines.append(f"{s.method:<{width}}  {s.metric_name:<8}  {s.mean:8.4f}  {s.std:8.4f}  {s.rank:>4}")
        return "\n".join(lines)


def _lower_is_better(metric: str) -> bool:
    return metric in ("rmse", "mae")


def config_digest(config: TrainConfig) -> str:
    payload = json.dumps(config.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()[:16]


def score_encoder(enc, dataset, y, splits: Sequence[DatasetSplit], probe: str) -> tuple[float, float, str]:
    """Mean validation and test metric of the probe over ``splits``."""
    X = embed_dataset(enc, dataset)
    results = [probe_split(X, y, s, probe) for s in splits]
    return (
        float(np.mean([r.val_metric for r in results])),
        float(np.mean([r.test_metric for r in results])),
        results[0].metric_name,
    )


def _better(a: float, b: float, metric: str) -> bool:
    return a < b if _lower_is_better(metric) else a > b


def run_comparison(
    dataset: Sequence[Graph],
    methods: Sequence[str],
    seeds: Sequence[int] = DEFAULT_SEEDS,
    config: TrainConfig | None = None,
    protocol: Protocol | None = None,
    metadata: dict | None = None,
    lambda_grid: Sequence[float] = LAMBDA_GRID,
    drop_grid: Sequence[float] = DROP_GRID,
) -> ComparisonReport:
    """Train and probe every method for every seed on splits shared across methods."""
    config = config or TrainConfig()
    protocol = protocol or Protocol()
    methods = list(dict.fromkeys(methods))
    if not methods:
        raise ValueError("methods must be non-empty")
    for m in methods:
        parse_method(m)
    if not seeds:
        raise ValueError("seeds must be non-empty")
    dataset = list(dataset)
    y = labels_of(dataset)
    probe = resolve_probe(protocol.probe, y)

    split_digests = {}
    runs: dict[str, list[RunScore]] = {m: [] for m in methods}
    for seed in seeds:
        splits = protocol.splits(len(dataset), seed)
        split_digests[seed] = [s.digest() for s in splits]
        base = replace(config, seed=int(seed))
        cache: dict = {}

        def fit(cfg: TrainConfig):
            key = (cfg.mode, cfg.lambda_reg, cfg.fixed_drop_ratio)
            if key not in cache:
                res = train(dataset, cfg)
                val, test, name = score_encoder(res.encoder, dataset, y, splits, probe)
                cache[key] = (val, test, name, res.history.final_drop_ratio)
            return cache[key]

        def adgcl_fix():
            return fit(replace(base, mode="adgcl"))

        for method in methods:
            kind, ratio = parse_method(method)
            selected, drop = "", None
            if kind == "ru":
                enc = init_models(dataset, base)[0]
                val, test, name = score_encoder(enc, dataset, y, splits, probe)
            elif kind == "infomax":
                val, test, name, _ = fit(replace(base, mode="infomax"))
            elif kind == "adgcl-fix":
                val, test, name, drop = adgcl_fix()
                selected = f"lambda={base.lambda_reg!r}"
            elif kind == "adgcl-opt":
                best = None
                for lam in lambda_grid:
                    out = fit(replace(base, mode="adgcl", lambda_reg=float(lam)))
                    if best is None or _better(out[0], best[1][0], out[2]):
                        best = (lam, out)
                lam, (val, test, name, drop) = best
                selected = f"lambda={float(lam)!r}"
            elif kind == "nadgcl-fix":
                saddle = adgcl_fix()[3]
                r = float(np.clip(saddle, *RATIO_CLIP))
                val, test, name, drop = fit(replace(base, mode="nadgcl", fixed_drop_ratio=r))
                selected = f"ratio={r!r}"
            elif kind == "nadgcl-opt":
                best = None
                for r in drop_grid:
                    out = fit(replace(base, mode="nadgcl", fixed_drop_ratio=float(r)))
                    if best is None or _better(out[0], best[1][0], out[2]):
                        best = (r, out)
                r, (val, test, name, drop) = best
                selected = f"ratio={float(r)!r}"
            else:
                val, test, name, drop = fit(replace(base, mode="nadgcl", fixed_drop_ratio=ratio))
                selected = f"ratio={ratio!r}"
            runs[method].append(RunScore(method, int(seed), val, test, name, selected, drop))
            log.info("seed %d %s: val=%.4f test=%.4f %s", seed, method, val, test, selected)

    summaries = []
    for m in methods:
        tests = np.array([r.test_metric for r in runs[m]])
        summaries.append(MethodSummary(m, runs[m][0].metric_name, float(tests.mean()), float(tests.std()), runs[m]))
    lower = _lower_is_better(summaries[0].metric_name)
    order = sorted(range(len(summaries)), key=lambda i: (summaries[i].mean if lower else -summaries[i].mean, i))
    for rank, i in enumerate(order, start=1):
        summaries[i].rank = rank

    meta = dict(metadata or {})
    meta.update(
        {
            "seeds": [int(s) for s in seeds],
            "num_seeds": len(seeds),
            "seed_note": "5 seeds by default to halve cost; the reference protocol averages 10 runs",
            "protocol": {"kind": protocol.kind, "split_ratios": list(protocol.split_ratios), "folds": protocol.folds, "probe": probe},
            "config": config.to_dict(),
            "config_digest": config_digest(config),
            "split_digests": {str(k): v for k, v in split_digests.items()},
        }
    )
    return ComparisonReport(summaries, meta)

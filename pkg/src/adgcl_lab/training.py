"""Alternating min-max training, the uniform-drop and no-augmentation ablations, and the lambda sweep."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .augmenter import (
    apply_augmentation,
    augmenter_logits,
    drop_probability,
    expected_drop_ratio,
    gumbel_relax,
    uniform_drop_keep,
)
from .encoder import encode, project
from .graphs import Graph, GraphBatch, make_batch
from .objectives import assemble_losses, info_nce
from .optim import ASCENT, DESCENT, Adam
from .params import (
    AugmenterParams,
    EncoderParams,
    HeadParams,
    init_augmenter,
    init_encoder,
    init_head,
)
from .tensor import Tape, TensorError, backward

log = logging.getLogger(__name__)

MODES = ("adgcl", "nadgcl", "infomax")
EPOCH_PRESETS = (20, 50, 80, 100, 150)
LAMBDA_GRID = (0.1, 0.3, 0.5, 1.0, 2.0, 5.0, 10.0)


class TrainingAborted(RuntimeError):
    def __init__(self, epoch: int, batch: int, reason: str):
        super().__init__(f"training aborted at epoch {epoch}, batch {batch}: {reason}")
        self.epoch = epoch
        self.batch = batch


@dataclass
class TrainConfig:
    lambda_reg: float = 5.0
    tau: float = 1.0
    lr_encoder: float = 1e-3
    lr_augmenter: float = 1e-3
    epochs: int = 20
    batch_size: int = 32
    hidden_dim: int = 32
    num_layers: int = 5
    dropout: float = 0.0
    seed: int = 0
    mode: str = "adgcl"
    fixed_drop_ratio: float = 0.0
    # reuse the encoder step's noise draw for the augmenter step
    shared_noise: bool = False

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.lambda_reg < 0:
            raise ValueError("lambda_reg must be >= 0")
        if self.tau <= 0:
            raise ValueError("tau must be > 0")
        if self.lr_encoder <= 0 or self.lr_augmenter <= 0:
            raise ValueError("learning rates must be > 0")
        if self.mode == "nadgcl" and not 0.0 <= self.fixed_drop_ratio < 1.0:
            raise ValueError("fixed_drop_ratio must lie in [0, 1) for nadgcl")
        if self.epochs < 0 or self.batch_size < 2:
            raise ValueError("epochs must be >= 0 and batch_size >= 2")
        if self.hidden_dim < 1 or self.num_layers < 1:
            raise ValueError("hidden_dim and num_layers must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EpochRecord:
    epoch: int
    nce: float
    reg: float
    drop_ratio: float
    seconds: float
    edges_seen: int = 0
    edges_dropped: int = 0


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)
    final_drop_ratio: float = float("nan")
    config: dict = field(default_factory=dict)

    HEADER = ("epoch", "nce", "reg", "drop_ratio", "seconds")

    def rows(self, with_time: bool = True) -> list[list]:
        out = []
        for r in self.records:
            row = [r.epoch, repr(r.nce), repr(r.reg), repr(r.drop_ratio)]
            if with_time:
                row.append(f"{r.seconds:.4f}")
            out.append(row)
        return out

    def write_csv(self, path, with_time: bool = True) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.HEADER if with_time else self.HEADER[:-1])
            w.writerows(self.rows(with_time))


@dataclass
class StepEvent:
    """Snapshot handed to ``step_hook`` around each parameter update."""

    phase: str  # "encoder" or "augmenter"
    epoch: int
    batch: int
    before: dict
    after: dict


@dataclass
class TrainResult:
    encoder: EncoderParams
    head: HeadParams
    augmenter: AugmenterParams | None
    history: TrainHistory

    def __iter__(self):
        if self.augmenter is None:
            return iter((self.encoder, self.head, self.history))
        return iter((self.encoder, self.head, self.augmenter, self.history))


def _streams(seed: int) -> dict[str, np.random.Generator]:
    ss = np.random.SeedSequence(seed)
    shuffle, noise, dropout = ss.spawn(3)
    return {
        "shuffle": np.random.default_rng(shuffle),
        "noise": np.random.default_rng(noise),
        "dropout": np.random.default_rng(dropout),
    }


def init_models(dataset: Sequence[Graph], config: TrainConfig):
    g0 = dataset[0]
    s = config.seed
    enc = init_encoder(g0.feat_dim, config.hidden_dim, config.num_layers, g0.edge_feat_dim, seed=s)
    head = init_head(config.hidden_dim, seed=s + 7919)
    aug = init_augmenter(
        g0.feat_dim, config.hidden_dim, config.num_layers, g0.edge_feat_dim, seed=s + 104729
    )
    return enc, head, aug


def minibatches(n: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffled index chunks; a trailing chunk with fewer than 2 graphs is dropped."""
    order = rng.permutation(n)
    chunks = [order[i : i + batch_size] for i in range(0, n, batch_size)]
    return [c for c in chunks if len(c) >= 2]


def _split_grads(grads: dict[int, np.ndarray], watched: dict[str, "Tensor"]) -> dict[str, np.ndarray]:
    return {k: grads[t.tape_id] for k, t in watched.items()}


def _check(value: float, epoch: int, batch: int, what: str) -> None:
    if not math.isfinite(value):
        raise TrainingAborted(epoch, batch, f"{what} is not finite")


def mean_drop_probability(batch: GraphBatch, aug: AugmenterParams) -> float:
    """Batch mean of the per-graph mean sigmoid(omega) (the Bernoulli drop probability)."""
    prob = drop_probability(augmenter_logits(batch, aug))
    return float(expected_drop_ratio(prob, batch)[1].data)


def dataset_drop_ratio(dataset: Sequence[Graph], aug: AugmenterParams, chunk: int = 256) -> float:
    """Mean over graphs of each graph's mean edge-drop probability."""
    total = 0.0
    for i in range(0, len(dataset), chunk):
        b = make_batch(dataset[i : i + chunk])
        prob = drop_probability(augmenter_logits(b, aug))
        per_graph, _ = expected_drop_ratio(prob, b)
        total += float(per_graph.data.sum())
    return total / len(dataset)


def _contrast(batch, enc_t, head_t, keep, config, rngs):
    """Anchor (all keep weights exactly 1) vs augmented view."""
    drop = config.dropout
    h1 = encode(batch, enc_t, None, drop, rngs["dropout"])
    h2 = encode(batch, enc_t, keep, drop, rngs["dropout"])
    return info_nce(project(h1, head_t), project(h2, head_t))


def train(
    dataset: Sequence[Graph],
    config: TrainConfig,
    step_hook: Callable[[StepEvent], None] | None = None,
    init: tuple | None = None,
) -> TrainResult:
    """Run any of the three modes; see :func:`train_adgcl` for the adversarial loop."""
    config.validate()
    if len(dataset) < 2:
        raise ValueError("training needs at least 2 graphs")
    rngs = _streams(config.seed)
    enc, head, aug = init if init is not None else init_models(dataset, config)
    enc, head, aug = enc.copy(), head.copy(), aug.copy()
    opt_enc = Adam(lr=config.lr_encoder)
    opt_aug = Adam(lr=config.lr_augmenter)
    adversarial = config.mode == "adgcl"
    history = TrainHistory(config=config.to_dict())

    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        nces, regs, drops = [], [], []
        seen = dropped = 0
        bi = -1
        try:
            for bi, idx in enumerate(minibatches(len(dataset), config.batch_size, rngs["shuffle"])):
                batch = make_batch([dataset[i] for i in idx])

                # encoder + head: descend -nce with the augmenter frozen
                delta = None
                with Tape() as tape:
                    enc_t = enc.watch(tape)
                    head_t = head.watch(tape)
                    reg = 0.0
                    if adversarial:
                        omega = augmenter_logits(batch, aug)
                        delta = rngs["noise"].random(batch.num_und)
                        p = gumbel_relax(omega, config.tau, delta)
                        keep = apply_augmentation(batch, p, "relaxed")
                        reg = expected_drop_ratio(p, batch)[1]
                        drops.append(float(expected_drop_ratio(drop_probability(omega), batch)[1].data))
                    elif config.mode == "nadgcl":
                        keep, nd = uniform_drop_keep(batch, config.fixed_drop_ratio, rngs["noise"])
                        seen += batch.num_und
                        dropped += nd
                    else:
                        keep = None
                    nce = _contrast(batch, enc_t, head_t, keep, config, rngs)
                    losses = assemble_losses(nce, reg, config.lambda_reg)
                _check(float(losses.encoder_loss.data), epoch, bi, "encoder loss")
                grads = backward(tape, losses.encoder_loss)
                before = _snapshot(enc, head, aug) if step_hook else None
                try:
                    new = opt_enc.step(
                        {**enc.prefixed("enc"), **head.prefixed("head")},
                        {
                            **{f"enc.{k}": g for k, g in _split_grads(grads, enc_t).items()},
                            **{f"head.{k}": g for k, g in _split_grads(grads, head_t).items()},
                        },
                        DESCENT,
                    )
                except TensorError as exc:
                    raise TrainingAborted(epoch, bi, str(exc)) from None
                enc = enc.replace({k[4:]: v for k, v in new.items() if k.startswith("enc.")})
                head = head.replace({k[5:]: v for k, v in new.items() if k.startswith("head.")})
                if step_hook:
                    step_hook(StepEvent("encoder", epoch, bi, before, _snapshot(enc, head, aug)))
                nces.append(float(losses.nce.data))
                regs.append(float(np.asarray(losses.reg.data)))

                if not adversarial:
                    continue

                # augmenter: climb (-nce - lambda * reg) with encoder and head frozen
                with Tape() as tape:
                    aug_t = aug.watch(tape)
                    omega = augmenter_logits(batch, aug_t)
                    if delta is None or not config.shared_noise:
                        delta = rngs["noise"].random(batch.num_und)
                    p = gumbel_relax(omega, config.tau, delta)
                    keep = apply_augmentation(batch, p, "relaxed")
                    nce = _contrast(batch, enc.constants(), head.constants(), keep, config, rngs)
                    losses = assemble_losses(nce, expected_drop_ratio(p, batch)[1], config.lambda_reg)
                _check(float(losses.augmenter_objective.data), epoch, bi, "augmenter objective")
                grads = backward(tape, losses.augmenter_objective)
                before = _snapshot(enc, head, aug) if step_hook else None
                try:
                    new = opt_aug.step(aug.arrays, _split_grads(grads, aug_t), ASCENT)
                except TensorError as exc:
                    raise TrainingAborted(epoch, bi, str(exc)) from None
                aug = aug.replace(new)
                if step_hook:
                    step_hook(StepEvent("augmenter", epoch, bi, before, _snapshot(enc, head, aug)))

        except TensorError as exc:
            raise TrainingAborted(epoch, bi, str(exc)) from None

        if config.mode == "nadgcl":
            drop_ratio = dropped / seen if seen else 0.0
        elif adversarial:
            drop_ratio = float(np.mean(drops)) if drops else 0.0
        else:
            drop_ratio = 0.0
        rec = EpochRecord(
            epoch=epoch,
            nce=float(np.mean(nces)) if nces else float("nan"),
            reg=float(np.mean(regs)) if regs else 0.0,
            drop_ratio=drop_ratio,
            seconds=time.perf_counter() - t0,
            edges_seen=seen,
            edges_dropped=dropped,
        )
        if nces:
            _check(rec.nce, epoch, -1, "epoch nce")
        history.records.append(rec)
        log.debug("epoch %d nce=%.4f reg=%.4f drop=%.4f", epoch, rec.nce, rec.reg, rec.drop_ratio)

    if adversarial:
        history.final_drop_ratio = dataset_drop_ratio(dataset, aug)
    elif config.mode == "nadgcl":
        history.final_drop_ratio = config.fixed_drop_ratio
    else:
        history.final_drop_ratio = 0.0
    return TrainResult(enc, head, aug if adversarial else None, history)


def _snapshot(enc, head, aug) -> dict:
    return {"encoder": enc.copy(), "head": head.copy(), "augmenter": aug.copy()}


def train_adgcl(dataset, config: TrainConfig, step_hook=None) -> TrainResult:
    """Per minibatch: one encoder/head descent step on -nce (fresh relaxed view),
    then one augmenter ascent step on ``-nce - lambda_reg * reg`` with a new
    noise draw.  Returns encoder, head, augmenter, history.
    """
    if config.mode != "adgcl":
        raise ValueError(f"train_adgcl needs mode='adgcl', got {config.mode!r}")
    return train(dataset, config, step_hook)


def train_nadgcl(dataset, config: TrainConfig, step_hook=None) -> TrainResult:
    """Same loop, but the view drops every undirected edge i.i.d. with
    probability ``fixed_drop_ratio``; there is no augmenter."""
    if config.mode != "nadgcl":
        raise ValueError(f"train_nadgcl needs mode='nadgcl', got {config.mode!r}")
    return train(dataset, config, step_hook)


def train_infomax(dataset, config: TrainConfig, step_hook=None) -> TrainResult:
    """Contrast every graph with an identical copy of itself."""
    if config.mode != "infomax":
        raise ValueError(f"train_infomax needs mode='infomax', got {config.mode!r}")
    return train(dataset, config, step_hook)


@dataclass
class SweepRow:
    lambda_reg: float
    final_drop_ratio: float
    val_metric: float
    epochs: int
    seed: int
    metric_name: str = ""

    HEADER = ("lambda", "final_drop_ratio", "val_metric", "epochs", "seed")

    def as_row(self) -> list:
        return [repr(self.lambda_reg), repr(self.final_drop_ratio), repr(self.val_metric), self.epochs, self.seed]


def write_sweep_csv(rows: Sequence[SweepRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SweepRow.HEADER)
        w.writerows(r.as_row() for r in rows)


def _sweep_point(args):
    dataset, lam, config, split, probe = args
    from .evaluation import validation_metric

    cfg = replace(config, lambda_reg=float(lam), mode="adgcl")
    res = train_adgcl(dataset, cfg)
    name, value = validation_metric(res.encoder, dataset, split, probe=probe)
    return SweepRow(float(lam), res.history.final_drop_ratio, value, cfg.epochs, cfg.seed, name), res


def sweep_lambda(
    dataset: Sequence[Graph],
    lambdas: Sequence[float],
    config: TrainConfig,
    split=None,
    probe: str = "auto",
    workers: int = 1,
    keep_results: bool = False,
):
    """Train one adversarial run per lambda (all from ``config.seed``) and probe it on validation."""
    from .graphs import split_dataset

    lambdas = list(lambdas)
    if not lambdas:
        raise ValueError("lambdas must be non-empty")
    if split is None:
        split = split_dataset(len(dataset), (0.8, 0.1, 0.1), config.seed)
    jobs = [(list(dataset), lam, config, split, probe) for lam in lambdas]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(_sweep_point, jobs))
    else:
        out = [_sweep_point(j) for j in jobs]
    rows = [r for r, _ in out]
    if keep_results:
        return rows, [res for _, res in out]
    return rows

"""Learnable edge dropping: per-edge drop logits, Gumbel relaxation, hard samples.

``omega`` is a DROP logit, one per undirected edge, shared by both
orientations.  The keep weight fed to the encoder is ``1 - p``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import _tensors, linear, node_embeddings
from .graphs import GraphBatch
from .params import AugmenterParams
from .tensor import (
    Tensor,
    TensorError,
    _sigmoid,
    as_tensor,
    concat,
    gather_rows,
    relu,
    reshape,
    scatter_add_rows,
    sigmoid,
    tsum,
)

DELTA_CLAMP = 1e-6


@dataclass
class EdgeDropState:
    omega: Tensor
    delta: np.ndarray
    p: Tensor
    tau: float


def augmenter_logits(batch: GraphBatch, params) -> Tensor:
    """Drop logits, shape (num_und, 1), averaged over both edge orientations."""
    p = _tensors(params)
    gnn = {k[4:]: v for k, v in p.items() if k.startswith("gnn.")}
    h = node_embeddings(batch, gnn)
    u, z = batch.und_edges[:, 0], batch.und_edges[:, 1]
    hu, hz = gather_rows(h, u), gather_rows(h, z)

    def edge_mlp(x):
        hid = relu(linear(x, p["edge_mlp.w1"], p["edge_mlp.b1"]))
        return linear(hid, p["edge_mlp.w2"], p["edge_mlp.b2"])

    fwd = edge_mlp(concat([hu, hz], axis=1))
    rev = edge_mlp(concat([hz, hu], axis=1))
    return (fwd + rev) * 0.5


def draw_delta(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.random(n)


def gumbel_relax(omega, tau: float, delta) -> Tensor:
    """``sigmoid((log d - log(1 - d) + omega) / tau)`` entrywise; d clamped into (0, 1)."""
    if not tau > 0:
        raise TensorError(f"gumbel_relax: tau must be positive, got {tau}")
    omega = as_tensor(omega)
    d = np.clip(np.asarray(delta, dtype=np.float64), DELTA_CLAMP, 1.0 - DELTA_CLAMP)
    if d.size != omega.data.size:
        raise TensorError(f"gumbel_relax: {d.size} noise draws for {omega.data.size} logits")
    noise = Tensor._wrap((np.log(d) - np.log1p(-d)).reshape(omega.shape))
    return sigmoid((omega + noise) * (1.0 / tau))


def relax(batch: GraphBatch, params, tau: float, rng: np.random.Generator) -> EdgeDropState:
    omega = augmenter_logits(batch, params)
    delta = draw_delta(rng, batch.num_und)
    return EdgeDropState(omega, delta, gumbel_relax(omega, tau, delta), tau)


def drop_probability(omega) -> np.ndarray:
    return _sigmoid(np.asarray(as_tensor(omega).data, dtype=np.float64))


def sample_hard(omega, seed) -> np.ndarray:
    """Boolean drop mask; each edge dropped with probability sigmoid(omega)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    prob = drop_probability(omega).reshape(-1)
    return rng.random(prob.size) < prob


def expected_drop_ratio(p, batch: GraphBatch) -> tuple[Tensor, Tensor]:
    """Per-graph mean drop weight over undirected edges, and its mean over graphs.

    Edgeless graphs count as ratio 0.
    """
    p = as_tensor(p)
    if p.data.size != batch.num_und:
        raise TensorError(f"expected_drop_ratio: {p.data.size} weights for {batch.num_und} edges")
    col = p if p.shape == (batch.num_und, 1) else reshape(p, (batch.num_und, 1))
    per_graph_sum = scatter_add_rows(col, batch.und_of_graph, batch.num_graphs)
    counts = batch.und_count.astype(np.float64)
    inv = np.divide(1.0, counts, out=np.zeros_like(counts), where=counts > 0)
    per_graph = per_graph_sum * Tensor._wrap(inv.reshape(-1, 1))
    return per_graph, tsum(per_graph) * (1.0 / batch.num_graphs)


def apply_augmentation(
    batch: GraphBatch, p, mode: str = "relaxed", rng: np.random.Generator | int | None = None
):
    """Keep weight per directed edge, shape (num_edges, 1).

    ``relaxed``: ``1 - p`` on both orientations (differentiable in p).
    ``hard``: each undirected edge dropped with probability p, giving 0/1 weights.
    """
    p = as_tensor(p)
    if p.data.size != batch.num_und:
        raise TensorError(f"apply_augmentation: {p.data.size} weights for {batch.num_und} edges")
    col = p if p.shape == (batch.num_und, 1) else reshape(p, (batch.num_und, 1))
    if mode == "relaxed":
        return gather_rows(1.0 - col, batch.edge_to_und)
    if mode == "hard":
        if rng is None:
            raise ValueError("hard augmentation needs a seed or generator")
        gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        drop = gen.random(batch.num_und) < p.data.reshape(-1)
        keep = (~drop).astype(np.float64)
        return Tensor._wrap(keep[batch.edge_to_und].reshape(-1, 1))
    raise ValueError(f"mode must be 'relaxed' or 'hard', got {mode!r}")


def uniform_drop_keep(batch: GraphBatch, ratio: float, rng: np.random.Generator) -> tuple[Tensor, int]:
    """Hard i.i.d. dropping at a fixed ratio; returns keep weights and the drop count."""
    drop = rng.random(batch.num_und) < ratio
    keep = (~drop).astype(np.float64)
    return Tensor._wrap(keep[batch.edge_to_und].reshape(-1, 1)), int(drop.sum())


__all__ = [
    "AugmenterParams",
    "EdgeDropState",
    "augmenter_logits",
    "gumbel_relax",
    "sample_hard",
    "expected_drop_ratio",
    "apply_augmentation",
    "uniform_drop_keep",
    "drop_probability",
    "relax",
]

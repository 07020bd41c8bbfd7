"""GIN encoder with weighted sum aggregation, sum pooling, and the projection head.

Forward functions take a mapping of parameter name -> Tensor so the same code
runs with taped (trainable) or constant parameters.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .graphs import GraphBatch
from .params import EncoderParams, HeadParams, ParamSet
from .tensor import (
    Tensor,
    TensorError,
    as_tensor,
    expand_cols,
    expand_rows,
    gather_rows,
    matmul,
    relu,
    reshape,
    scatter_add_rows,
)

Params = Mapping[str, Tensor]


def _tensors(params) -> Params:
    return params.constants() if isinstance(params, ParamSet) else params


def linear(h: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return matmul(h, w) + expand_rows(b, h.shape[0])


def mlp2(h: Tensor, w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor) -> Tensor:
    return linear(relu(linear(h, w1, b1)), w2, b2)


def _keep_column(keep, num_edges: int) -> Tensor | None:
    if keep is None:
        return None
    keep = as_tensor(keep)
    if keep.data.size != num_edges:
        raise TensorError(f"edge_keep_weight has {keep.data.size} entries, batch has {num_edges} edges")
    return keep if keep.shape == (num_edges, 1) else reshape(keep, (num_edges, 1))


def gin_layer(
    h: Tensor,
    batch: GraphBatch,
    edge_keep_weight,
    layer: Params,
) -> Tensor:
    """``MLP(h_v + sum_{u->v} keep(u,v) * (h_u + edge_embed(x_uv)))`` with eps = 0.

    ``layer`` holds ``w1, b1, w2, b2`` and optionally ``we`` (edge-feature
    embedding).  ``edge_keep_weight=None`` means every edge is kept with
    weight exactly 1.
    """
    src, dst = batch.edges[:, 0], batch.edges[:, 1]
    msg = gather_rows(h, src)
    if "we" in layer and batch.edge_feat is not None:
        msg = msg + matmul(Tensor._wrap(batch.edge_feat), layer["we"])
    keep = _keep_column(edge_keep_weight, batch.num_edges)
    if keep is not None:
        msg = msg * expand_cols(keep, h.shape[1])
    agg = scatter_add_rows(msg, dst, batch.num_nodes)
    return mlp2(h + agg, layer["w1"], layer["b1"], layer["w2"], layer["b2"])


def node_embeddings(
    batch: GraphBatch,
    params,
    edge_keep_weight=None,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Final-layer node representations; relu (and dropout) between layers only."""
    p = _tensors(params)
    num_layers = sum(1 for k in p if k.startswith("layer") and k.endswith(".w1"))
    if num_layers < 1:
        raise TensorError("encoder parameters define no layers")
    h = linear(Tensor._wrap(batch.node_feat), p["input.w"], p["input.b"])
    for k in range(num_layers):
        layer = {
            name: p[f"layer{k}.{name}"]
            for name in ("w1", "b1", "w2", "b2", "we")
            if f"layer{k}.{name}" in p
        }
        h = gin_layer(h, batch, edge_keep_weight, layer)
        if k < num_layers - 1:
            h = relu(h)
            if dropout > 0.0:
                if rng is None:
                    raise ValueError("dropout needs an rng")
                mask = (rng.random(h.shape) >= dropout) / (1.0 - dropout)
                h = h * Tensor._wrap(mask)
    return h


def sum_pool(h: Tensor, batch: GraphBatch) -> Tensor:
    return scatter_add_rows(h, batch.graph_of_node, batch.num_graphs)


def encode(
    batch: GraphBatch,
    params,
    edge_keep_weight=None,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Per-graph embeddings, shape (num_graphs, hidden_dim)."""
    return sum_pool(node_embeddings(batch, params, edge_keep_weight, dropout, rng), batch)


def project(embeddings: Tensor, head) -> Tensor:
    p = _tensors(head)
    if embeddings.shape[1] != p["w1"].shape[0]:
        raise TensorError(
            f"project: embedding dim {embeddings.shape[1]} != head input dim {p['w1'].shape[0]}"
        )
    return mlp2(embeddings, p["w1"], p["b1"], p["w2"], p["b2"])


def embed_numpy(batch: GraphBatch, params: EncoderParams) -> np.ndarray:
    return encode(batch, params).numpy()


__all__ = [
    "gin_layer",
    "node_embeddings",
    "encode",
    "project",
    "sum_pool",
    "linear",
    "mlp2",
    "EncoderParams",
    "HeadParams",
]

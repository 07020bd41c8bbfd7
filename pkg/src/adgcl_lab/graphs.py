"""Attributed undirected graphs, block-diagonal batches, JSON-Lines I/O, splits."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class GraphError(ValueError):
    pass


def _as_label(label):
    if label is None:
        return None
    if isinstance(label, (list, tuple, np.ndarray)):
        return tuple(float(v) for v in np.asarray(label, dtype=np.float64).reshape(-1))
    if isinstance(label, (bool, np.bool_)):
        raise GraphError("label must be an int or a list of floats")
    if isinstance(label, (int, np.integer)):
        return int(label)
    if isinstance(label, float) and label.is_integer():
        return int(label)
    raise GraphError(f"label must be an int or a list of floats, got {label!r}")


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph stored with both edge orientations.

    ``edges`` is an (E, 2) int array; for every row (u, v) the row (v, u) is
    present too.  ``edge_feat`` rows align with ``edges``.
    """

    num_nodes: int
    edges: np.ndarray
    node_feat: np.ndarray
    edge_feat: np.ndarray | None = None
    label: int | tuple[float, ...] | None = None

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        feat = np.atleast_2d(np.asarray(self.node_feat, dtype=np.float64))
        efeat = None
        if self.edge_feat is not None:
            efeat = np.asarray(self.edge_feat, dtype=np.float64)
            if efeat.ndim == 1:
                efeat = efeat.reshape(-1, 1)
        for arr in (edges, feat) + ((efeat,) if efeat is not None else ()):
            arr.setflags(write=False)
        object.__setattr__(self, "num_nodes", int(self.num_nodes))
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "node_feat", feat)
        object.__setattr__(self, "edge_feat", efeat)
        object.__setattr__(self, "label", _as_label(self.label))
        self.validate()

    @classmethod
    def from_undirected(
        cls,
        num_nodes: int,
        pairs: Iterable[Sequence[int]],
        node_feat,
        edge_feat=None,
        label=None,
    ) -> "Graph":
        """Build from undirected pairs, adding the reverse orientation.

        Pairs listed in both orientations, or repeated, are merged; the first
        occurrence supplies the edge features.
        """
        pairs = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
        ef = None if edge_feat is None else np.asarray(edge_feat, dtype=np.float64)
        if ef is not None:
            ef = ef.reshape(len(pairs), -1)
        seen: dict[tuple[int, int], int] = {}
        for k, (u, v) in enumerate(pairs.tolist()):
            if u == v:
                raise GraphError(f"self-loop on node {u}")
            key = (min(u, v), max(u, v))
            seen.setdefault(key, k)
        keys = list(seen)
        directed = []
        for u, v in keys:
            directed.append((u, v))
            directed.append((v, u))
        efeat = None
        if ef is not None:
            rows = [ef[seen[k]] for k in keys]
            efeat = np.repeat(np.asarray(rows).reshape(len(keys), -1), 2, axis=0)
        return cls(
            num_nodes,
            np.asarray(directed, dtype=np.int64).reshape(-1, 2),
            node_feat,
            efeat,
            label,
        )

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def num_undirected_edges(self) -> int:
        return self.num_edges // 2

    @property
    def feat_dim(self) -> int:
        return int(self.node_feat.shape[1])

    @property
    def edge_feat_dim(self) -> int:
        return 0 if self.edge_feat is None else int(self.edge_feat.shape[1])

    def undirected_pairs(self) -> np.ndarray:
        """Each undirected edge once, as (min, max), in storage order."""
        e = self.edges
        return e[e[:, 0] < e[:, 1]]

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges[:, 0], minlength=self.num_nodes)

    def validate(self) -> None:
        n = self.num_nodes
        if n < 1:
            raise GraphError("num_nodes must be positive")
        e = self.edges
        if e.size and (e.min() < 0 or e.max() >= n):
            bad = e[(e < 0).any(1) | (e >= n).any(1)][0].tolist()
            raise GraphError(f"edge {bad} out of range for {n} nodes")
        if np.any(e[:, 0] == e[:, 1]):
            raise GraphError("self-loops are not allowed")
        fwd = set(map(tuple, e.tolist()))
        if len(fwd) != len(e):
            raise GraphError("duplicate directed edges")
        for u, v in fwd:
            if (v, u) not in fwd:
                raise GraphError(f"edge ({u}, {v}) has no reverse orientation")
        if self.node_feat.shape[0] != n:
            raise GraphError(f"node_feat has {self.node_feat.shape[0]} rows, expected {n}")
        if self.edge_feat is not None and self.edge_feat.shape[0] != len(e):
            raise GraphError("edge_feat rows do not match edges")
        if not np.all(np.isfinite(self.node_feat)):
            raise GraphError("node_feat contains non-finite values")

    def permute(self, perm: Sequence[int]) -> "Graph":
        """Relabel node ``i`` as ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(self.num_nodes)):
            raise GraphError("perm is not a permutation of the nodes")
        feat = np.empty_like(self.node_feat)
        feat[perm] = self.node_feat
        return Graph(self.num_nodes, perm[self.edges], feat, self.edge_feat, self.label)

    def to_record(self) -> dict:
        """JSON-Lines record: each undirected edge once."""
        keep = self.edges[:, 0] < self.edges[:, 1]
        rec = {
            "num_nodes": self.num_nodes,
            "edges": self.edges[keep].tolist(),
            "node_feat": self.node_feat.tolist(),
        }
        if self.edge_feat is not None:
            rec["edge_feat"] = self.edge_feat[keep].tolist()
        if self.label is not None:
            rec["label"] = list(self.label) if isinstance(self.label, tuple) else self.label
        return rec

    def same_as(self, other: "Graph") -> bool:
        """Exact structural and attribute equality, including edge order."""
        return (
            self.num_nodes == other.num_nodes
            and np.array_equal(self.edges, other.edges)
            and np.array_equal(self.node_feat, other.node_feat)
            and (
                (self.edge_feat is None and other.edge_feat is None)
                or (
                    self.edge_feat is not None
                    and other.edge_feat is not None
                    and np.array_equal(self.edge_feat, other.edge_feat)
                )
            )
            and self.label == other.label
        )


def graph_from_record(rec: dict) -> Graph:
    for key in ("num_nodes", "edges", "node_feat"):
        if key not in rec:
            raise GraphError(f"missing key {key!r}")
    edges = rec["edges"]
    if not all(isinstance(p, (list, tuple)) and len(p) == 2 for p in edges):
        raise GraphError("edges must be a list of [u, v] pairs")
    n = rec["num_nodes"]
    if not isinstance(n, int) or isinstance(n, bool):
        raise GraphError("num_nodes must be an integer")
    for u, v in edges:
        if not (isinstance(u, int) and isinstance(v, int)):
            raise GraphError("edge endpoints must be integers")
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"edge [{u}, {v}] out of range for {n} nodes")
    edge_feat = rec.get("edge_feat")
    if edge_feat is not None and len(edge_feat) != len(edges):
        raise GraphError("edge_feat is not aligned with edges")
    return Graph.from_undirected(n, edges, rec["node_feat"], edge_feat, rec.get("label"))


def load_jsonl(path) -> list[Graph]:
    graphs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise GraphError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise GraphError(f"{path}:{lineno}: expected a JSON object")
            try:
                graphs.append(graph_from_record(rec))
            except GraphError as exc:
                raise GraphError(f"{path}:{lineno}: graph {len(graphs)}: {exc}") from None
    return graphs


def save_jsonl(graphs: Iterable[Graph], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for g in graphs:
            fh.write(json.dumps(g.to_record(), separators=(",", ":")) + "\n")


@dataclass(frozen=True, eq=False)
class GraphBatch:
    """Disjoint union of graphs with global node and edge indices.

    ``und_edges`` lists every undirected edge once as (u, v) with u < v;
    ``edge_to_und`` maps each directed edge to its undirected id.
    """

    num_graphs: int
    node_offset: np.ndarray
    node_count: np.ndarray
    graph_of_node: np.ndarray
    edges: np.ndarray
    edge_offset: np.ndarray
    edge_count: np.ndarray
    undirected_pair: np.ndarray
    und_edges: np.ndarray
    edge_to_und: np.ndarray
    und_of_graph: np.ndarray  # graph id of each undirected edge
    und_count: np.ndarray
    node_feat: np.ndarray
    edge_feat: np.ndarray | None
    labels: np.ndarray | None

    @property
    def num_nodes(self) -> int:
        return int(self.node_feat.shape[0])

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def num_und(self) -> int:
        return int(self.und_edges.shape[0])

    def graph(self, i: int) -> Graph:
        lo, n = int(self.node_offset[i]), int(self.node_count[i])
        elo, ne = int(self.edge_offset[i]), int(self.edge_count[i])
        ef = None if self.edge_feat is None else self.edge_feat[elo : elo + ne]
        label = None
        if self.labels is not None:
            label = self.labels[i].tolist() if self.labels.ndim == 2 else int(self.labels[i])
        return Graph(n, self.edges[elo : elo + ne] - lo, self.node_feat[lo : lo + n], ef, label)

    def unbatch(self) -> list[Graph]:
        return [self.graph(i) for i in range(self.num_graphs)]


def make_batch(graphs: Sequence[Graph]) -> GraphBatch:
    graphs = list(graphs)
    if not graphs:
        raise GraphError("make_batch needs at least one graph")
    fdim = graphs[0].feat_dim
    edim = graphs[0].edge_feat_dim
    for k, g in enumerate(graphs):
        if g.feat_dim != fdim or g.edge_feat_dim != edim:
            raise GraphError(
                f"graph {k} has feature dims ({g.feat_dim}, {g.edge_feat_dim}), "
                f"expected ({fdim}, {edim})"
            )
    node_count = np.array([g.num_nodes for g in graphs], dtype=np.int64)
    edge_count = np.array([g.num_edges for g in graphs], dtype=np.int64)
    node_offset = np.concatenate([[0], np.cumsum(node_count)[:-1]]).astype(np.int64)
    edge_offset = np.concatenate([[0], np.cumsum(edge_count)[:-1]]).astype(np.int64)
    edges = np.concatenate(
        [g.edges + off for g, off in zip(graphs, node_offset)], axis=0
    ).reshape(-1, 2)
    n_total = int(node_count.sum())
    graph_of_node = np.repeat(np.arange(len(graphs)), node_count)

    src, dst = edges[:, 0], edges[:, 1]
    fkey = src * n_total + dst
    order = np.argsort(fkey, kind="stable")
    rkey = dst * n_total + src
    pair = order[np.searchsorted(fkey[order], rkey)] if len(edges) else np.zeros(0, np.int64)

    canon = src < dst
    und_id = np.full(len(edges), -1, dtype=np.int64)
    und_id[canon] = np.arange(int(canon.sum()))
    edge_to_und = np.where(canon, und_id, und_id[pair]) if len(edges) else und_id
    und_edges = edges[canon]
    und_of_graph = graph_of_node[und_edges[:, 0]] if len(und_edges) else np.zeros(0, np.int64)
    und_count = np.bincount(und_of_graph, minlength=len(graphs)).astype(np.int64)

    edge_feat = None
    if edim:
        edge_feat = np.concatenate([g.edge_feat for g in graphs], axis=0)

    labels = None
    if all(g.label is not None for g in graphs):
        if all(isinstance(g.label, tuple) for g in graphs):
            labels = np.array([g.label for g in graphs], dtype=np.float64)
        elif all(isinstance(g.label, int) for g in graphs):
            labels = np.array([g.label for g in graphs], dtype=np.int64)
        else:
            raise GraphError("mixed label types in batch")

    return GraphBatch(
        num_graphs=len(graphs),
        node_offset=node_offset,
        node_count=node_count,
        graph_of_node=graph_of_node,
        edges=edges,
        edge_offset=edge_offset,
        edge_count=edge_count,
        undirected_pair=pair.astype(np.int64),
        und_edges=und_edges,
        edge_to_und=edge_to_und,
        und_of_graph=und_of_graph,
        und_count=und_count,
        node_feat=np.concatenate([g.node_feat for g in graphs], axis=0),
        edge_feat=edge_feat,
        labels=labels,
    )


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[int, ...]
    val: tuple[int, ...]
    test: tuple[int, ...]

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)

    def digest(self) -> str:
        payload = json.dumps([self.train, self.val, self.test]).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def split_dataset(n: int, ratios=(0.8, 0.1, 0.1), seed: int = 0) -> DatasetSplit:
    """Shuffle ``range(n)`` and cut it; val/test sizes are floored, train takes the rest."""
    if n < 3:
        raise GraphError(f"need at least 3 items to split, got {n}")
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise GraphError(f"ratios must be three positive numbers summing to 1, got {ratios}")
    n_val = math.floor(n * ratios[1] + 1e-9)
    n_test = math.floor(n * ratios[2] + 1e-9)
    perm = np.random.default_rng(seed).permutation(n).tolist()
    n_train = n - n_val - n_test
    return DatasetSplit(
        train=tuple(perm[:n_train]),
        val=tuple(perm[n_train : n_train + n_val]),
        test=tuple(perm[n_train + n_val :]),
    )

"""1-WL color refinement.

Colors are renamed canonically every round: the distinct
(own color, sorted neighbour colors) keys are sorted and numbered, so color ids
depend only on graph structure, never on node order.  That numbering is an
injective dictionary, not a lossy hash.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graphs import Graph, GraphError


@dataclass(frozen=True)
class WlColoring:
    rounds: tuple[tuple[int, ...], ...]
    stable_round: int
    signature: str

    @property
    def final(self) -> tuple[int, ...]:
        return self.rounds[-1]

    def num_classes(self, k: int = -1) -> int:
        return len(set(self.rounds[k]))


def _initial_colors(feats: np.ndarray) -> list[int]:
    rows = [tuple(r) for r in np.asarray(feats, dtype=np.float64).tolist()]
    table = {row: i for i, row in enumerate(sorted(set(rows)))}
    return [table[r] for r in rows]


def _neighbours(num_nodes: int, edges: np.ndarray) -> list[list[int]]:
    nbrs: list[list[int]] = [[] for _ in range(num_nodes)]
    for u, v in edges.tolist():
        nbrs[v].append(u)
    return nbrs


def _refine(colors: list[int], nbrs: list[list[int]]) -> list[int]:
    keys = [(colors[v], tuple(sorted(colors[u] for u in nbrs[v]))) for v in range(len(colors))]
    table = {k: i for i, k in enumerate(sorted(set(keys)))}
    return [table[k] for k in keys]


def _run(colors: list[int], nbrs: list[list[int]], max_rounds: int) -> tuple[list[list[int]], int]:
    rounds = [colors]
    stable = None
    for k in range(1, max_rounds + 1):
        nxt = _refine(rounds[-1], nbrs)
        rounds.append(nxt)
        if len(set(nxt)) == len(set(rounds[-2])):
            stable = k
            break
    if stable is None:
        stable = len(rounds) - 1
    return rounds, stable


def _histogram(colors: Sequence[int]) -> tuple[tuple[int, int], ...]:
    return tuple(sorted(Counter(colors).items()))


def wl_refine(graph: Graph, max_rounds: int | None = None) -> WlColoring:
    """Refine until the number of classes stops growing or ``max_rounds`` is hit.

    ``stable_round`` is the first round whose class count equals the previous
    round's (1 for a graph that is already stable at the start).
    """
    n = graph.num_nodes
    if max_rounds is None:
        max_rounds = n
    nbrs = _neighbours(n, graph.edges)
    rounds, stable = _run(_initial_colors(graph.node_feat), nbrs, max(int(max_rounds), 0))
    signature = "|".join(
        ";".join(f"{c}:{m}" for c, m in _histogram(r)) for r in rounds[: stable + 1]
    )
    return WlColoring(tuple(tuple(r) for r in rounds), stable, signature)


def wl_equivalent(g1: Graph, g2: Graph) -> bool:
    """True when 1-WL cannot tell the graphs apart.

    Both graphs are refined together as one disjoint union, so the color
    dictionary is shared and final histograms are comparable.
    """
    if g1.feat_dim != g2.feat_dim:
        raise GraphError("wl_equivalent: feature dimensions differ")
    if g1.num_nodes != g2.num_nodes or g1.num_edges != g2.num_edges:
        return False
    n1 = g1.num_nodes
    n = n1 + g2.num_nodes
    edges = np.concatenate([g1.edges, g2.edges + n1]).reshape(-1, 2)
    feats = np.concatenate([g1.node_feat, g2.node_feat])
    rounds, _ = _run(_initial_colors(feats), _neighbours(n, edges), n)
    final = rounds[-1]
    return _histogram(final[:n1]) == _histogram(final[n1:])

"""Seeded synthetic graph datasets.

Both generators are pure functions of ``(n_graphs, seed, spec)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .graphs import Graph, GraphError

MOTIFS = ("none", "cycle", "path", "clique", "star")


def parse_motif(name: str) -> tuple[str, int]:
    """``"cycle5"`` -> ("cycle", 5); ``"none"`` -> ("none", 0)."""
    if name == "none":
        return "none", 0
    for kind in MOTIFS[1:]:
        if name.startswith(kind):
            try:
                size = int(name[len(kind) :])
            except ValueError:
                break
            if size < 2 or (kind == "cycle" and size < 3):
                raise GraphError(f"motif {name!r} is too small")
            return kind, size
    raise GraphError(f"unknown motif {name!r}; expected none or one of {MOTIFS[1:]} plus a size")


def motif_edges(kind: str, nodes: list[int]) -> list[tuple[int, int]]:
    k = len(nodes)
    if kind == "none":
        return []
    if kind == "cycle":
        return [(nodes[i], nodes[(i + 1) % k]) for i in range(k)]
    if kind == "path":
        return [(nodes[i], nodes[i + 1]) for i in range(k - 1)]
    if kind == "clique":
        return [(nodes[i], nodes[j]) for i in range(k) for j in range(i + 1, k)]
    if kind == "star":
        return [(nodes[0], nodes[i]) for i in range(1, k)]
    raise GraphError(f"unknown motif kind {kind!r}")


def node_features(num_nodes: int, pairs, mode: str, max_degree: int) -> np.ndarray:
    if mode == "constant":
        return np.ones((num_nodes, 1))
    if mode == "degree":
        deg = np.zeros(num_nodes, dtype=np.int64)
        for u, v in pairs:
            deg[u] += 1
            deg[v] += 1
        feat = np.zeros((num_nodes, max_degree + 1))
        feat[np.arange(num_nodes), np.minimum(deg, max_degree)] = 1.0
        return feat
    raise GraphError(f"feature_mode must be 'constant' or 'degree', got {mode!r}")


def _erdos_renyi(rng: np.random.Generator, n: int, p: float) -> set[tuple[int, int]]:
    iu, ju = np.triu_indices(n, k=1)
    hit = rng.random(iu.size) < p
    return set(zip(iu[hit].tolist(), ju[hit].tolist()))


@dataclass(frozen=True)
class MotifSpec:
    """Class ``c`` graphs get motif ``class_motifs[c]`` planted on a random node subset."""

    class_motifs: tuple[str, ...] = ("none", "cycle5")
    background_p: float = 0.05
    min_nodes: int = 12
    max_nodes: int = 20
    feature_mode: str = "degree"
    max_degree: int = 8

    def validate(self) -> None:
        if len(self.class_motifs) < 2:
            raise GraphError("class_motifs: need at least two classes")
        if not 0.0 <= self.background_p <= 1.0:
            raise GraphError("background_p must lie in [0, 1]")
        if not 1 <= self.min_nodes <= self.max_nodes:
            raise GraphError("min_nodes/max_nodes: need 1 <= min_nodes <= max_nodes")
        for name in self.class_motifs:
            _, size = parse_motif(name)
            if size > self.min_nodes:
                raise GraphError(
                    f"class_motifs: motif {name!r} has {size} nodes, more than min_nodes={self.min_nodes}"
                )
        node_features(1, [], self.feature_mode, self.max_degree)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["class_motifs"] = list(self.class_motifs)
        return d


def generate_planted_motif(n_graphs: int, seed: int, spec: MotifSpec = MotifSpec()) -> list[Graph]:
    """Balanced labelled graphs: Erdos-Renyi background plus a class-specific motif."""
    spec.validate()
    if n_graphs < 1:
        raise GraphError("n_graphs must be positive")
    rng = np.random.default_rng(seed)
    n_classes = len(spec.class_motifs)
    labels = np.arange(n_graphs) % n_classes
    rng.shuffle(labels)
    graphs = []
    for label in labels.tolist():
        n = int(rng.integers(spec.min_nodes, spec.max_nodes + 1))
        pairs = _erdos_renyi(rng, n, spec.background_p)
        kind, size = parse_motif(spec.class_motifs[label])
        if size:
            nodes = rng.choice(n, size=size, replace=False).tolist()
            for u, v in motif_edges(kind, nodes):
                pairs.add((min(u, v), max(u, v)))
        pairs = sorted(pairs)
        feat = node_features(n, pairs, spec.feature_mode, spec.max_degree)
        graphs.append(Graph.from_undirected(n, pairs, feat, label=label))
    return graphs


@dataclass(frozen=True)
class RegressionSpec:
    """Target = mean degree / normalizer + N(0, noise_sigma^2)."""

    min_nodes: int = 12
    max_nodes: int = 20
    edge_p: tuple[float, float] = (0.05, 0.4)
    noise_sigma: float = 0.0
    normalizer: float | None = None
    feature_mode: str = "degree"
    max_degree: int = 8

    @property
    def scale(self) -> float:
        return float(self.normalizer) if self.normalizer else float(self.max_nodes - 1)

    def validate(self) -> None:
        if not 1 <= self.min_nodes <= self.max_nodes:
            raise GraphError("min_nodes/max_nodes: need 1 <= min_nodes <= max_nodes")
        lo, hi = self.edge_p
        if not 0.0 <= lo <= hi <= 1.0:
            raise GraphError("edge_p must be an interval inside [0, 1]")
        if self.noise_sigma < 0:
            raise GraphError("noise_sigma must be non-negative")
        if self.scale <= 0:
            raise GraphError("normalizer must be positive")
        node_features(1, [], self.feature_mode, self.max_degree)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["edge_p"] = list(self.edge_p)
        return d


def degree_target(num_nodes: int, num_undirected_edges: int, scale: float) -> float:
    return (2.0 * num_undirected_edges / num_nodes) / scale


def generate_regression_degree_target(
    n_graphs: int, seed: int, spec: RegressionSpec = RegressionSpec()
) -> list[Graph]:
    """Erdos-Renyi graphs with a per-graph density, labelled by normalised mean degree."""
    spec.validate()
    if n_graphs < 1:
        raise GraphError("n_graphs must be positive")
    rng = np.random.default_rng(seed)
    graphs = []
    for _ in range(n_graphs):
        n = int(rng.integers(spec.min_nodes, spec.max_nodes + 1))
        p = float(rng.uniform(*spec.edge_p))
        pairs = sorted(_erdos_renyi(rng, n, p))
        noise = float(rng.normal(0.0, spec.noise_sigma)) if spec.noise_sigma > 0 else 0.0
        y = degree_target(n, len(pairs), spec.scale) + noise
        feat = node_features(n, pairs, spec.feature_mode, spec.max_degree)
        graphs.append(Graph.from_undirected(n, pairs, feat, label=[y]))
    return graphs

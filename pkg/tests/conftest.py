import numpy as np
import pytest

from adgcl_lab.graphs import Graph


def cycle(n, feat=None):
    feat = np.ones((n, 1)) if feat is None else feat
    return Graph.from_undirected(n, [(i, (i + 1) % n) for i in range(n)], feat)


def path(n):
    return Graph.from_undirected(n, [(i, i + 1) for i in range(n - 1)], np.ones((n, 1)))


def disjoint_union(*graphs):
    pairs, off = [], 0
    feats = []
    for g in graphs:
        pairs += [(u + off, v + off) for u, v in g.undirected_pairs().tolist()]
        feats.append(g.node_feat)
        off += g.num_nodes
    return Graph.from_undirected(off, pairs, np.concatenate(feats))


def random_graph(rng, n_min=4, n_max=12, p=0.3, feat_dim=3, label=None):
    n = int(rng.integers(n_min, n_max + 1))
    iu, ju = np.triu_indices(n, 1)
    hit = rng.random(iu.size) < p
    feat = rng.uniform(0.0, 1.0, size=(n, feat_dim))
    return Graph.from_undirected(n, list(zip(iu[hit], ju[hit])), feat, label=label)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

import itertools

import numpy as np
import pytest

from adgcl_lab.datasets import (
    MotifSpec,
    RegressionSpec,
    degree_target,
    generate_planted_motif,
    generate_regression_degree_target,
    node_features,
    parse_motif,
)
from adgcl_lab.graphs import Graph, GraphError


def has_cycle5(g):
    adj = {tuple(e) for e in g.edges.tolist()}
    for nodes in itertools.combinations(range(g.num_nodes), 5):
        for perm in itertools.permutations(nodes[1:]):
            ring = (nodes[0],) + perm
            if all((ring[i], ring[(i + 1) % 5]) in adj for i in range(5)):
                return True
    return False


class TestMotifDataset:
    def test_balanced(self):
        graphs = generate_planted_motif(200, 0, MotifSpec())
        labels = [g.label for g in graphs]
        assert labels.count(0) == labels.count(1) == 100

    def test_three_classes_balanced(self):
        spec = MotifSpec(class_motifs=("none", "cycle5", "star6"))
        labels = [g.label for g in generate_planted_motif(30, 1, spec)]
        assert [labels.count(c) for c in range(3)] == [10, 10, 10]

    def test_class_one_contains_the_cycle(self):
        spec = MotifSpec(min_nodes=6, max_nodes=8)
        graphs = generate_planted_motif(12, 2, spec)
        for g in graphs:
            if g.label == 1:
                assert has_cycle5(g)

    def test_deterministic_and_seed_sensitive(self):
        a = generate_planted_motif(20, 5)
        b = generate_planted_motif(20, 5)
        c = generate_planted_motif(20, 6)
        assert all(x.same_as(y) for x, y in zip(a, b))
        assert not all(x.same_as(y) for x, y in zip(a, c))

    def test_node_range_and_invariants(self):
        for g in generate_planted_motif(50, 3, MotifSpec(background_p=0.3)):
            g.validate()
            assert 12 <= g.num_nodes <= 20

    def test_motif_larger_than_min_nodes(self):
        with pytest.raises(GraphError, match="class_motifs"):
            generate_planted_motif(4, 0, MotifSpec(class_motifs=("none", "cycle13")))

    def test_unknown_motif(self):
        with pytest.raises(GraphError):
            parse_motif("hexagon")
        with pytest.raises(GraphError):
            parse_motif("cycle2")

    def test_parse(self):
        assert parse_motif("none") == ("none", 0)
        assert parse_motif("clique4") == ("clique", 4)

    def test_degree_features_are_one_hot_and_capped(self):
        feat = node_features(4, [(0, 1), (0, 2), (0, 3)], "degree", 2)
        assert feat.tolist() == [[0, 0, 1], [0, 1, 0], [0, 1, 0], [0, 1, 0]]

    def test_constant_features(self):
        spec = MotifSpec(feature_mode="constant")
        g = generate_planted_motif(2, 0, spec)[0]
        assert np.all(g.node_feat == 1.0)

    def test_bad_feature_mode(self):
        with pytest.raises(GraphError):
            MotifSpec(feature_mode="random").validate()


class TestRegressionDataset:
    def test_k4_label(self):
        k4 = [(i, j) for i in range(4) for j in range(i + 1, 4)]
        assert degree_target(4, len(k4), 19.0) == pytest.approx(3 / 19)

    def test_empty_graph_label(self):
        assert degree_target(5, 0, 4.0) == 0.0

    def test_labels_match_structure_without_noise(self):
        spec = RegressionSpec(noise_sigma=0.0)
        for g in generate_regression_degree_target(30, 0, spec):
            mean_deg = g.degrees().mean()
            assert g.label[0] == pytest.approx(mean_deg / spec.scale, abs=1e-12)
            g.validate()

    def test_deterministic(self):
        a = generate_regression_degree_target(10, 1, RegressionSpec(noise_sigma=0.0))
        b = generate_regression_degree_target(10, 1, RegressionSpec(noise_sigma=0.0))
        assert [g.label for g in a] == [g.label for g in b]

    def test_noise_is_seeded(self):
        spec = RegressionSpec(noise_sigma=0.1)
        a = generate_regression_degree_target(10, 1, spec)
        b = generate_regression_degree_target(10, 1, spec)
        assert [g.label for g in a] == [g.label for g in b]

    def test_invalid(self):
        with pytest.raises(GraphError):
            RegressionSpec(edge_p=(0.5, 0.2)).validate()
        with pytest.raises(GraphError):
            RegressionSpec(noise_sigma=-1.0).validate()

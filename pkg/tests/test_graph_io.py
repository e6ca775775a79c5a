import json

import numpy as np
import pytest

from cogl.errors import ConfigError, GraphLoadError
from cogl.graph_io import (Graph, load_graph_dir, normalize_adjacency, save_graph,
                           subsample_nodes)

from _oracles import normalized_adjacency_oracle
from conftest import random_graph


def write_dataset(tmp_path, edges, features, labels, splits):
    (tmp_path / "edges.tsv").write_text(edges)
    (tmp_path / "features.csv").write_text(features)
    (tmp_path / "labels.csv").write_text(labels)
    (tmp_path / "splits.json").write_text(json.dumps(splits))
    return tmp_path


def minimal_dataset(tmp_path):
    return write_dataset(
        tmp_path,
        edges="# toy graph\n0\t1\n",
        features="1.0,0.0\n0.0,1.0\n",
        labels="0,0\n1,1\n",
        splits={"train": [0], "val": [1], "test": []},
    )


def test_two_node_toy_graph(tmp_path):
    graph = load_graph_dir(minimal_dataset(tmp_path))
    assert graph.n_nodes == 2
    assert np.array_equal(graph.adjacency, [[0.0, 1.0], [1.0, 0.0]])
    assert graph.n_features == 2
    assert graph.n_classes == 2
    assert graph.train_mask.tolist() == [True, False]


def test_edge_listed_once_implies_both_directions(tmp_path):
    d = write_dataset(tmp_path, "1\t0\t2.5\n", "0\n0\n", "0,0\n1,0\n",
                      {"train": [0], "val": [1], "test": []})
    graph = load_graph_dir(d)
    assert graph.adjacency[0, 1] == graph.adjacency[1, 0] == 2.5


def test_out_of_range_node_id_names_line(tmp_path):
    d = minimal_dataset(tmp_path)
    (d / "edges.tsv").write_text("0\t1\n0\t7\n")
    with pytest.raises(GraphLoadError) as err:
        load_graph_dir(d)
    assert "edges.tsv:2" in str(err.value)


def test_malformed_edge_line_named(tmp_path):
    d = minimal_dataset(tmp_path)
    (d / "edges.tsv").write_text("0\t1\nnot an edge\n")
    with pytest.raises(GraphLoadError) as err:
        load_graph_dir(d)
    assert ":2" in str(err.value)


def test_self_loop_rejected(tmp_path):
    d = minimal_dataset(tmp_path)
    (d / "edges.tsv").write_text("1\t1\n")
    with pytest.raises(GraphLoadError, match="self-loop"):
        load_graph_dir(d)


def test_duplicate_label_rejected(tmp_path):
    d = minimal_dataset(tmp_path)
    (d / "labels.csv").write_text("0,0\n0,1\n")
    with pytest.raises(GraphLoadError, match="one-hot"):
        load_graph_dir(d)


def test_overlapping_masks_rejected(tmp_path):
    d = minimal_dataset(tmp_path)
    (d / "splits.json").write_text(json.dumps({"train": [0], "val": [0], "test": []}))
    with pytest.raises(GraphLoadError, match="overlap"):
        load_graph_dir(d)


def test_unlabeled_nodes_allowed(tmp_path):
    d = minimal_dataset(tmp_path)
    (d / "labels.csv").write_text("0,1\n")
    graph = load_graph_dir(d)
    assert graph.labels[1].sum() == 0.0


def test_normalize_single_node():
    g = Graph(np.zeros((1, 1)), np.ones((1, 2)), np.array([[1.0]]),
              np.array([True]), np.array([False]), np.array([False]))
    assert np.array_equal(normalize_adjacency(g).a_tilde, [[1.0]])


def test_normalize_two_nodes_one_edge():
    adj = np.array([[0.0, 1.0], [1.0, 0.0]])
    g = Graph(adj, np.ones((2, 1)), np.eye(2),
              np.array([True, False]), np.array([False, True]), np.array([False, False]))
    expected = np.full((2, 2), 0.5)
    assert np.max(np.abs(normalize_adjacency(g).a_tilde - expected)) < 1e-12


def test_normalize_matches_oracle(rng):
    for _ in range(20):
        n = int(rng.integers(2, 50))
        g = random_graph(rng, n, 3, 2)
        got = normalize_adjacency(g).a_tilde
        want = np.array(normalized_adjacency_oracle(g.adjacency.tolist()))
        assert np.max(np.abs(got - want)) < 1e-12
        assert np.max(np.abs(got - got.T)) < 1e-9
        assert np.all(np.diag(got) > 0.0)


def test_round_trip(tmp_path, rng):
    g = random_graph(rng, 17, 5, 3)
    g.adjacency[g.adjacency > 0] = 0.37  # non-default weights must survive
    g.labels[4] = 0.0                    # and so must an unlabeled node
    save_graph(g, tmp_path)
    again = load_graph_dir(tmp_path)
    assert np.array_equal(g.adjacency, again.adjacency)
    assert np.array_equal(g.features, again.features)
    assert np.array_equal(g.labels, again.labels)
    assert np.array_equal(g.train_mask, again.train_mask)
    assert np.array_equal(g.val_mask, again.val_mask)
    assert np.array_equal(g.test_mask, again.test_mask)


def test_subsample_full_is_identity(rng):
    g = random_graph(rng, 9, 4, 2)
    sub = subsample_nodes(g, 9, seed=5)
    assert np.array_equal(sub.adjacency, g.adjacency)
    assert np.array_equal(sub.features, g.features)


def test_subsample_single_node(rng):
    g = random_graph(rng, 9, 4, 2)
    sub = subsample_nodes(g, 1, seed=5)
    assert sub.n_nodes == 1
    assert sub.adjacency.sum() == 0.0


def test_subsample_deterministic(rng):
    g = random_graph(rng, 30, 4, 2)
    a = subsample_nodes(g, 11, seed=9)
    b = subsample_nodes(g, 11, seed=9)
    assert np.array_equal(a.adjacency, b.adjacency)
    assert np.array_equal(a.features, b.features)


def test_subsample_zero_rejected(rng):
    g = random_graph(rng, 5, 4, 2)
    with pytest.raises(ConfigError):
        subsample_nodes(g, 0, seed=1)
    with pytest.raises(ConfigError):
        subsample_nodes(g, 6, seed=1)

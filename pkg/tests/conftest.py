import numpy as np
import pytest

from cogl.graph_io import Graph


def random_graph(rng, n, m, c, edge_prob=0.3):
    adj = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < edge_prob:
                adj[i, j] = adj[j, i] = 1.0
    features = rng.normal(size=(n, m))
    labels = np.zeros((n, c))
    labels[np.arange(n), rng.integers(0, c, size=n)] = 1.0
    thirds = rng.permutation(n)
    masks = [np.zeros(n, dtype=bool) for _ in range(3)]
    for pos, node in enumerate(thirds):
        masks[min(pos * 3 // n, 2)][node] = True
    graph = Graph(adj, features, labels, *masks)
    graph.validate()
    return graph


def two_clique_graph():
    """Two 6-cliques whose features are orthogonal indicator blocks."""
    n = 12
    adj = np.zeros((n, n))
    for block in (range(0, 6), range(6, 12)):
        for i in block:
            for j in block:
                if i < j:
                    adj[i, j] = adj[j, i] = 1.0
    features = np.zeros((n, 4))
    features[:6, 0] = 1.0
    features[:6, 1] = 0.25
    features[6:, 2] = 1.0
    features[6:, 3] = 0.25
    labels = np.zeros((n, 2))
    labels[:6, 0] = 1.0
    labels[6:, 1] = 1.0
    train = np.zeros(n, dtype=bool)
    val = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    train[[0, 1, 6, 7]] = True
    val[[2, 8]] = True
    test[[3, 4, 5, 9, 10, 11]] = True
    graph = Graph(adj, features, labels, train, val, test)
    graph.validate()
    return graph


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

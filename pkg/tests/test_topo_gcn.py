import math

import numpy as np
import pytest

from cogl import numerics as nm
from cogl.errors import ConfigError
from cogl.graph_io import Graph, NormalizedAdjacency, normalize_adjacency
from cogl.topo_gcn import (SharedConvParams, accuracy, classification_loss,
                           predict, topology_forward)

from _oracles import classification_loss_oracle
from conftest import random_graph


def make_conv(rng, m, h, c):
    return SharedConvParams(w1=nm.parameter(rng.normal(size=(m, h))),
                            w2=nm.parameter(rng.normal(size=(h, c))))


def test_single_node_reduces_to_dense_layers(rng):
    g = Graph(np.zeros((1, 1)), rng.normal(size=(1, 3)), np.array([[1.0]]),
              np.array([True]), np.array([False]), np.array([False]))
    conv = make_conv(rng, 3, 4, 2)
    out = topology_forward(normalize_adjacency(g), nm.constant(g.features), conv)
    want = np.maximum(g.features @ conv.w1.value, 0.0) @ conv.w2.value
    assert np.max(np.abs(out.value - want)) < 1e-12


def test_zero_features_annihilate(rng):
    conv = make_conv(rng, 3, 4, 2)
    adj = NormalizedAdjacency(np.eye(5))
    out = topology_forward(adj, nm.constant(np.zeros((5, 3))), conv)
    assert np.array_equal(out.value, np.zeros((5, 2)))


def test_forward_matches_direct_evaluation(rng):
    g = random_graph(rng, 6, 4, 3)
    conv = make_conv(rng, 4, 5, 3)
    a_tilde = normalize_adjacency(g)
    got = topology_forward(a_tilde, nm.constant(g.features), conv)
    want = a_tilde.a_tilde @ np.maximum(
        a_tilde.a_tilde @ g.features @ conv.w1.value, 0.0) @ conv.w2.value
    assert np.max(np.abs(got.value - want)) < 1e-12


def test_confident_correct_logits_give_zero_loss():
    logits = nm.constant([[1000.0, 0.0, 0.0], [0.0, 1000.0, 0.0]])
    labels = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    loss = classification_loss(logits, labels, np.array([True, True]))
    assert loss.value[0, 0] == pytest.approx(0.0, abs=1e-9)


def test_uniform_logits_give_ln_c_per_row():
    logits = nm.constant(np.zeros((4, 3)))
    labels = np.zeros((4, 3))
    labels[np.arange(4), [0, 1, 2, 0]] = 1.0
    labeled = np.array([True, True, False, False])
    loss = classification_loss(logits, labels, labeled)
    assert loss.value[0, 0] == pytest.approx(2.0 * math.log(3.0))


def test_loss_matches_double_loop_oracle(rng):
    logits = rng.normal(size=(5, 3))
    labels = np.zeros((5, 3))
    labels[np.arange(5), rng.integers(0, 3, 5)] = 1.0
    labeled = rng.random(5) < 0.6
    labeled[0] = True
    got = classification_loss(nm.constant(logits), labels, labeled).value[0, 0]
    want = classification_loss_oracle(logits.tolist(), labels.tolist(), labeled.tolist())
    assert got == pytest.approx(want, abs=1e-10)


def test_empty_labeled_mask_rejected(rng):
    with pytest.raises(ConfigError):
        classification_loss(nm.constant(np.zeros((2, 2))), np.eye(2),
                            np.array([False, False]))


def test_loss_invariant_to_per_row_logit_shift(rng):
    logits = rng.normal(size=(5, 3))
    labels = np.zeros((5, 3))
    labels[np.arange(5), rng.integers(0, 3, 5)] = 1.0
    labeled = np.ones(5, dtype=bool)
    base = classification_loss(nm.constant(logits), labels, labeled).value[0, 0]
    shifted = logits + rng.normal(size=(5, 1))
    again = classification_loss(nm.constant(shifted), labels, labeled).value[0, 0]
    assert again == pytest.approx(base, abs=1e-9)


def test_unlabeled_rows_receive_exactly_zero_gradient(rng):
    logits = nm.parameter(rng.normal(size=(6, 3)))
    labels = np.zeros((6, 3))
    labels[np.arange(6), rng.integers(0, 3, 6)] = 1.0
    labeled = np.array([True, False, True, False, False, True])
    with nm.Tape() as tape:
        loss = classification_loss(logits, labels, labeled)
    nm.backward(tape, loss)
    assert np.all(logits.grad[~labeled] == 0.0)
    assert np.any(logits.grad[labeled] != 0.0)


def test_gcn_gradients_pass_finite_differences(rng):
    g = random_graph(rng, 6, 4, 3)
    conv = make_conv(rng, 4, 5, 3)
    a_tilde = normalize_adjacency(g)
    x = nm.constant(g.features)

    def loss_fn():
        return classification_loss(topology_forward(a_tilde, x, conv),
                                   g.labels, g.train_mask)

    with nm.Tape() as tape:
        loss = loss_fn()
    nm.backward(tape, loss)
    analytic = [conv.w1.grad.copy(), conv.w2.grad.copy()]
    nm.zero_grads([conv.w1, conv.w2])
    numeric = nm.finite_difference(lambda: float(loss_fn().value[0, 0]),
                                   [conv.w1, conv.w2])
    for got, want in zip(analytic, numeric):
        assert nm.max_relative_error(got, want) < 1e-4


def test_predict_breaks_ties_to_lowest_index():
    logits = nm.constant([[0.0, 0.0, 0.0], [1.0, 5.0, 5.0], [2.0, 1.0, 2.0]])
    assert predict(logits).tolist() == [0, 1, 0]


def test_accuracy_alignment_and_bounds(rng):
    labels = np.eye(4)
    aligned = predict(nm.constant(labels * 10.0))
    assert accuracy(aligned, labels, np.ones(4, dtype=bool)) == 1.0
    with pytest.raises(ConfigError):
        accuracy(aligned, labels, np.zeros(4, dtype=bool))


def test_accuracy_of_random_predictions_near_chance(rng):
    n, c = 20000, 4
    labels = np.zeros((n, c))
    labels[np.arange(n), rng.integers(0, c, n)] = 1.0
    preds = rng.integers(0, c, n)
    acc = accuracy(preds, labels, np.ones(n, dtype=bool))
    assert abs(acc - 1.0 / c) < 0.02

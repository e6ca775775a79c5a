"""Topology-side convolution and the semi-supervised classification loss.

The convolution weights live in ``SharedConvParams``: the same two matrices
drive both this branch and the content branch, which is what couples the two
networks during training.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import numerics as nm
from .errors import ConfigError
from .graph_io import NormalizedAdjacency


@dataclass
class SharedConvParams:
    """First- and second-layer convolution weights, shared across branches."""

    w1: nm.Matrix   # m x h
    w2: nm.Matrix   # h x c


def topology_forward(a_tilde: NormalizedAdjacency, x: nm.Matrix,
                     params: SharedConvParams, dropout: float = 0.0,
                     training: bool = False,
                     rng: Optional[np.random.Generator] = None,
                     adj_node: Optional[nm.Matrix] = None) -> nm.Matrix:
    """Two-layer convolution over the normalized topology.

    Returns a_tilde @ relu(a_tilde @ x @ w1) @ w2.  In training mode dropout
    is applied to the input features and to the hidden activation.
    Pass ``adj_node`` to reuse an existing constant for the adjacency.
    """
    adj = adj_node if adj_node is not None else nm.constant(a_tilde.a_tilde)
    x = nm.dropout(x, dropout, rng, training)
    hidden = nm.relu(nm.matmul(adj, nm.matmul(x, params.w1)))
    hidden = nm.dropout(hidden, dropout, rng, training)
    return nm.matmul(nm.matmul(adj, hidden), params.w2)


def classification_loss(logits: nm.Matrix, labels: np.ndarray,
                        labeled: np.ndarray) -> nm.Matrix:
    """Summed cross-entropy of row-softmaxed logits over the labeled nodes.

    Unlabeled rows contribute nothing, to the value and to the gradient.
    """
    if not np.any(labeled):
        raise ConfigError("classification_loss: labeled mask is empty")
    target = nm.constant(labels * labeled[:, None])
    log_probs = nm.log(nm.row_softmax(logits))
    return nm.scale(nm.sum_all(nm.mul(log_probs, target)), -1.0)


def predict(logits: nm.Matrix) -> np.ndarray:
    """Per-node class index; ties break to the lowest index."""
    return np.argmax(logits.value, axis=1)


def accuracy(pred: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    """Fraction of masked nodes whose one-hot label matches the prediction."""
    if not np.any(mask):
        raise ConfigError("accuracy: mask is empty")
    idx = np.nonzero(mask)[0]
    hits = labels[idx, pred[idx]] == 1.0
    return float(hits.sum() / idx.size)

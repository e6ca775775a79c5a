"""Feature-derived affinity network and its convolution branch.

The affinity between nodes i and j is a learned score of the absolute
difference of their projected features, softmax-normalized per row, so the
resulting matrix is row-stochastic but generally asymmetric.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import numerics as nm
from .errors import ConfigError, DimensionError


@dataclass
class ContentParams:
    """Projection into a reduced space plus the pair-scoring vector."""

    w_p: nm.Matrix      # m x d, d < m
    w_c: nm.Matrix      # d x 1

    def __post_init__(self):
        m, d = self.w_p.shape
        if d >= m:
            raise ConfigError(f"projection must reduce dimension: d={d} >= m={m}")
        if self.w_c.shape != (d, 1):
            raise DimensionError(
                f"scoring vector {self.w_c.shape} does not fit projection {self.w_p.shape}")


@dataclass
class ContentNetwork:
    """Row-stochastic learned affinities over all node pairs."""

    a_bar: nm.Matrix    # |V| x |V|


def build_content_network(x: nm.Matrix, params: ContentParams) -> ContentNetwork:
    """Affinity matrix from features: row_softmax(relu(score of |P_i - P_j|)).

    P = x @ w_p projects features to d dimensions; the pair score is
    w_c^T |P_i - P_j|.  Differentiable in w_p and w_c; O(|V|^2 d) time.
    """
    projected = nm.matmul(x, params.w_p)
    raw = nm.pairwise_weighted_l1(projected, params.w_c)
    return ContentNetwork(nm.row_softmax(nm.relu(raw)))


def content_forward(a_bar: ContentNetwork, x: nm.Matrix, w1: nm.Matrix,
                    w2: nm.Matrix, dropout: float = 0.0, training: bool = False,
                    rng: Optional[np.random.Generator] = None) -> nm.Matrix:
    """Two-layer convolution over the content network.

    Returns a_bar @ relu(a_bar @ x @ w1) @ w2; dropout hits the hidden
    activation in training mode only.
    """
    aff = a_bar.a_bar
    hidden = nm.relu(nm.matmul(aff, nm.matmul(x, w1)))
    hidden = nm.dropout(hidden, dropout, rng, training)
    return nm.matmul(nm.matmul(aff, hidden), w2)


def softmax_gram(values: np.ndarray) -> np.ndarray:
    """Plain-numpy gram matrix of row-softmaxed values (for constant targets)."""
    shifted = values - values.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    sm = e / e.sum(axis=1, keepdims=True)
    return sm @ sm.T


def reconstruction_loss_from_gram(gram_x: nm.Matrix, x_bar2: nm.Matrix) -> nm.Matrix:
    """Reconstruction loss against a precomputed feature gram matrix."""
    sm = nm.row_softmax(x_bar2)
    gram_emb = nm.matmul(sm, nm.transpose(sm))
    return nm.frobenius_sq(nm.sub(gram_x, gram_emb))


def reconstruction_loss(x: nm.Matrix, x_bar2: nm.Matrix) -> nm.Matrix:
    """Squared Frobenius gap between the row-softmaxed gram matrices.

    Both inputs are row-softmax normalized, then compared through their
    |V| x |V| gram matrices; zero iff the normalized grams coincide.
    """
    if x.rows != x_bar2.rows:
        raise DimensionError(
            f"reconstruction_loss: row counts differ, {x.shape} vs {x_bar2.shape}")
    sm = nm.row_softmax(x)
    gram_x = nm.matmul(sm, nm.transpose(sm))
    return reconstruction_loss_from_gram(gram_x, x_bar2)

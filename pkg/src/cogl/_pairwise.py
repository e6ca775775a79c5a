"""Kernels for pairwise weighted L1 scores between all row pairs of a matrix.

For projected features ``p`` (n x d) and a weight vector ``w`` (d,) the score
matrix is ``s[i, j] = sum_k w[k] * |p[i, k] - p[j, k]|``.  This is the one
O(n^2 d) hot spot of the model, so a compiled kernel is used when numba is
importable; a chunked numpy fallback keeps the package functional without it.
Set ``COGL_NO_NUMBA=1`` to force the fallback.
"""

from __future__ import annotations

import os

import numpy as np

_USE_NUMBA = os.environ.get("COGL_NO_NUMBA", "") != "1"
if _USE_NUMBA:
    try:
        from numba import njit, prange
    except ImportError:  # pragma: no cover
        _USE_NUMBA = False

# Rows per block in the numpy fallback; bounds temporaries to ~block*n*d floats.
_BLOCK = 64


if _USE_NUMBA:

    @njit(parallel=True, cache=True)
    def _scores_nb(p, w):
        n, d = p.shape
        s = np.empty((n, n), dtype=np.float64)
        for i in prange(n):
            for j in range(n):
                acc = 0.0
                for k in range(d):
                    diff = p[i, k] - p[j, k]
                    acc += w[k] * (diff if diff >= 0.0 else -diff)
                s[i, j] = acc
        return s

    @njit(parallel=True, cache=True)
    def _backward_nb(p, w, g):
        # grad_p[i,k] = w[k] * sum_j (g[i,j] + g[j,i]) * sign(p[i,k] - p[j,k])
        # grad_w[k]   = sum_ij g[i,j] * |p[i,k] - p[j,k]|, accumulated per row
        # so each prange iteration writes disjoint rows (deterministic).
        n, d = p.shape
        gp = np.zeros((n, d), dtype=np.float64)
        gw_rows = np.zeros((n, d), dtype=np.float64)
        for i in prange(n):
            for j in range(n):
                gij = g[i, j]
                c = gij + g[j, i]
                for k in range(d):
                    diff = p[i, k] - p[j, k]
                    if diff > 0.0:
                        gp[i, k] += w[k] * c
                        gw_rows[i, k] += gij * diff
                    elif diff < 0.0:
                        gp[i, k] -= w[k] * c
                        gw_rows[i, k] -= gij * diff
        return gp, gw_rows


def _scores_np(p, w):
    n, _ = p.shape
    s = np.empty((n, n), dtype=np.float64)
    for lo in range(0, n, _BLOCK):
        hi = min(lo + _BLOCK, n)
        block = np.abs(p[lo:hi, None, :] - p[None, :, :])
        s[lo:hi] = block @ w
    return s


def _backward_np(p, w, g):
    n, d = p.shape
    gp = np.zeros((n, d), dtype=np.float64)
    gw = np.zeros(d, dtype=np.float64)
    for lo in range(0, n, _BLOCK):
        hi = min(lo + _BLOCK, n)
        diff = p[lo:hi, None, :] - p[None, :, :]
        sgn = np.sign(diff)
        coeff = g[lo:hi, :] + g[:, lo:hi].T
        gp[lo:hi] = np.einsum("ij,ijk->ik", coeff, sgn) * w
        gw += np.einsum("ij,ijk->k", g[lo:hi, :], np.abs(diff))
    return gp, gw


def pairwise_scores(p: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Score matrix s[i,j] = sum_k w[k] * |p[i,k] - p[j,k]|."""
    if _USE_NUMBA:
        return _scores_nb(p, w)
    return _scores_np(p, w)


def pairwise_backward(p: np.ndarray, w: np.ndarray, g: np.ndarray):
    """Gradients of sum_ij g[i,j] * s[i,j] with respect to p and w."""
    if _USE_NUMBA:
        gp, gw_rows = _backward_nb(p, w, g)
        return gp, gw_rows.sum(axis=0)
    return _backward_np(p, w, g)

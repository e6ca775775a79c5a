"""Dense float64 matrices with reverse-mode differentiation on an explicit tape.

Every public operation validates that its output is finite, computes eagerly,
and (when a tape is active and the result depends on a parameter) records a
backward rule on that tape.  ``backward`` replays the tape in reverse and
accumulates gradients additively, so a node feeding several consumers (the
shared convolution weights do) receives the sum of all contributions.

The op set is exactly what the model's forward passes need; this is not a
general autodiff system.  One tape per training thread: the active-tape stack
is thread-local and in-flight tapes must not be shared.
"""

from __future__ import annotations

import threading
from typing import Callable, Optional, Sequence

import numpy as np

from . import _pairwise
from .errors import ConfigError, ContractError, DimensionError, NumericalError

LOG_FLOOR = 1e-12

_local = threading.local()


def _tapes() -> list:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = []
        _local.stack = stack
    return stack


def active_tape() -> Optional["Tape"]:
    stack = _tapes()
    return stack[-1] if stack else None


class Matrix:
    """A dense float64 matrix node.

    ``value`` is a 2-D C-contiguous array; ``grad`` starts as None and is
    filled by ``backward``.  Scalars are represented as 1x1 matrices.
    """

    __slots__ = ("value", "grad", "requires_grad", "_vjp")

    def __init__(self, value: np.ndarray, requires_grad: bool = False):
        self.value = value
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._vjp: Optional[Callable[[np.ndarray], None]] = None

    @property
    def rows(self) -> int:
        return self.value.shape[0]

    @property
    def cols(self) -> int:
        return self.value.shape[1]

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        flag = "param" if self.requires_grad and self._vjp is None else "node"
        return f"Matrix({self.rows}x{self.cols}, {flag})"


class Tape:
    """Ordered record of operations; inputs always precede their consumers."""

    def __init__(self):
        self.nodes: list[Matrix] = []

    def __enter__(self) -> "Tape":
        _tapes().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _tapes().pop()
        assert popped is self
        return False


def _as_array(values, op: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True, order="C")
    if arr.ndim != 2:
        raise DimensionError(f"{op}: expected a 2-D matrix, got shape {arr.shape}")
    return arr


def _assert_finite(arr: np.ndarray, op: str) -> None:
    # A single-pass sum catches NaN and almost every Inf cheaply; only a
    # suspicious sum pays for the full elementwise scan.
    if not np.isfinite(arr.sum()) and not np.isfinite(arr).all():
        raise NumericalError(f"{op}: produced non-finite values")


def constant(values) -> Matrix:
    """A matrix that never receives gradients."""
    arr = _as_array(values, "constant")
    _assert_finite(arr, "constant")
    return Matrix(arr, requires_grad=False)


def parameter(values) -> Matrix:
    """A trainable leaf; ``backward`` accumulates into its ``grad`` slot."""
    arr = _as_array(values, "parameter")
    _assert_finite(arr, "parameter")
    return Matrix(arr, requires_grad=True)


def detach(a: Matrix) -> Matrix:
    """A constant view of ``a``'s value; gradients stop here."""
    return Matrix(a.value, requires_grad=False)


def _record(value: np.ndarray, op: str, inputs: Sequence[Matrix],
            vjp: Callable[[np.ndarray], None]) -> Matrix:
    _assert_finite(value, op)
    node = Matrix(value, requires_grad=any(m.requires_grad for m in inputs))
    tape = active_tape()
    if tape is not None and node.requires_grad:
        node._vjp = vjp
        tape.nodes.append(node)
    return node


def _accumulate(target: Matrix, contribution: np.ndarray, owned: bool) -> None:
    # ``owned`` marks freshly allocated arrays that may be adopted directly.
    if not target.requires_grad:
        return
    if target.grad is None:
        target.grad = contribution if owned else contribution.copy()
    else:
        target.grad += contribution


def backward(tape: Tape, loss: Matrix) -> None:
    """Populate gradients of everything ``loss`` depends on via ``tape``.

    Intermediate node gradients are reset first; leaf (parameter) gradients
    accumulate across calls and are the caller's to zero.  Deterministic:
    the same tape always yields bit-identical gradients.
    """
    if loss.shape != (1, 1):
        raise ContractError(f"backward: loss must be 1x1, got {loss.shape}")
    if not any(node is loss for node in tape.nodes):
        raise ContractError("backward: loss was not recorded on this tape")
    for node in tape.nodes:
        node.grad = None
    loss.grad = np.ones((1, 1))
    for node in reversed(tape.nodes):
        if node.grad is not None and node._vjp is not None:
            node._vjp(node.grad)


def zero_grads(params: Sequence[Matrix]) -> None:
    for p in params:
        p.grad = None


# ---------------------------------------------------------------------------
# operations


def matmul(a: Matrix, b: Matrix) -> Matrix:
    if a.cols != b.rows:
        raise DimensionError(f"matmul: {a.shape} x {b.shape} is undefined")
    out = a.value @ b.value

    def vjp(g):
        _accumulate(a, g @ b.value.T, owned=True)
        _accumulate(b, a.value.T @ g, owned=True)

    return _record(out, "matmul", (a, b), vjp)


def add(a: Matrix, b: Matrix) -> Matrix:
    if a.shape != b.shape:
        raise DimensionError(f"add: shapes {a.shape} and {b.shape} differ")

    def vjp(g):
        _accumulate(a, g, owned=False)
        _accumulate(b, g, owned=False)

    return _record(a.value + b.value, "add", (a, b), vjp)


def sub(a: Matrix, b: Matrix) -> Matrix:
    if a.shape != b.shape:
        raise DimensionError(f"sub: shapes {a.shape} and {b.shape} differ")

    def vjp(g):
        _accumulate(a, g, owned=False)
        _accumulate(b, -g, owned=True)

    return _record(a.value - b.value, "sub", (a, b), vjp)


def add_rowvec(a: Matrix, v: Matrix) -> Matrix:
    """Add a 1 x cols row vector to every row (bias add)."""
    if v.shape != (1, a.cols):
        raise DimensionError(f"add_rowvec: bias {v.shape} does not fit {a.shape}")

    def vjp(g):
        _accumulate(a, g, owned=False)
        _accumulate(v, g.sum(axis=0, keepdims=True), owned=True)

    return _record(a.value + v.value, "add_rowvec", (a, v), vjp)


def add_scalar(a: Matrix, s: Matrix) -> Matrix:
    """Add a 1x1 matrix to every entry."""
    if s.shape != (1, 1):
        raise DimensionError(f"add_scalar: expected 1x1 addend, got {s.shape}")

    def vjp(g):
        _accumulate(a, g, owned=False)
        _accumulate(s, np.array([[g.sum()]]), owned=True)

    return _record(a.value + s.value[0, 0], "add_scalar", (a, s), vjp)


def scale(a: Matrix, c: float) -> Matrix:
    c = float(c)

    def vjp(g):
        _accumulate(a, g * c, owned=True)

    return _record(a.value * c, "scale", (a,), vjp)


def mul(a: Matrix, b: Matrix) -> Matrix:
    if a.shape != b.shape:
        raise DimensionError(f"mul: shapes {a.shape} and {b.shape} differ")

    def vjp(g):
        _accumulate(a, g * b.value, owned=True)
        _accumulate(b, g * a.value, owned=True)

    return _record(a.value * b.value, "mul", (a, b), vjp)


def transpose(a: Matrix) -> Matrix:
    def vjp(g):
        _accumulate(a, np.ascontiguousarray(g.T), owned=True)

    return _record(np.ascontiguousarray(a.value.T), "transpose", (a,), vjp)


def relu(a: Matrix) -> Matrix:
    out = np.maximum(a.value, 0.0)

    def vjp(g):
        _accumulate(a, g * _relu_grad(a.value), owned=True)

    return _record(out, "relu", (a,), vjp)


def _relu_grad(x: np.ndarray) -> np.ndarray:
    return (x > 0.0).astype(np.float64)


def abs_diff(a: Matrix, b: Matrix) -> Matrix:
    if a.shape != b.shape:
        raise DimensionError(f"abs_diff: shapes {a.shape} and {b.shape} differ")
    diff = a.value - b.value

    def vjp(g):
        s = np.sign(diff)
        _accumulate(a, g * s, owned=True)
        _accumulate(b, -g * s, owned=True)

    return _record(np.abs(diff), "abs_diff", (a, b), vjp)


def row_softmax(a: Matrix) -> Matrix:
    """Softmax along each row, stabilized by per-row max subtraction."""
    shifted = a.value - a.value.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        gs = g * out
        _accumulate(a, gs - out * gs.sum(axis=1, keepdims=True), owned=True)

    return _record(out, "row_softmax", (a,), vjp)


def log(a: Matrix) -> Matrix:
    """Natural log with the input floored at 1e-12 for stability."""
    clipped = np.maximum(a.value, LOG_FLOOR)
    out = np.log(clipped)

    def vjp(g):
        _accumulate(a, g * (a.value > LOG_FLOOR) / clipped, owned=True)

    return _record(out, "log", (a,), vjp)


def sigmoid(a: Matrix) -> Matrix:
    v = a.value
    out = np.empty_like(v)
    pos = v >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)

    def vjp(g):
        _accumulate(a, g * out * (1.0 - out), owned=True)

    return _record(out, "sigmoid", (a,), vjp)


def frobenius_sq(a: Matrix) -> Matrix:
    """Sum of squared entries, as a 1x1 matrix."""
    out = np.array([[np.dot(a.value.ravel(), a.value.ravel())]])

    def vjp(g):
        _accumulate(a, (2.0 * g[0, 0]) * a.value, owned=True)

    return _record(out, "frobenius_sq", (a,), vjp)


def sum_all(a: Matrix) -> Matrix:
    """Sum of all entries, as a 1x1 matrix."""
    out = np.array([[a.value.sum()]])

    def vjp(g):
        _accumulate(a, np.full(a.shape, g[0, 0]), owned=True)

    return _record(out, "sum_all", (a,), vjp)


def mean_all(a: Matrix) -> Matrix:
    return scale(sum_all(a), 1.0 / a.value.size)


def dropout(a: Matrix, rate: float, rng: Optional[np.random.Generator] = None,
            training: bool = True) -> Matrix:
    """Inverted dropout: kept entries are divided by 1-rate.

    Identity in evaluation mode (returns ``a`` itself) and for rate 0.
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout: rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return a
    if rng is None:
        raise ConfigError("dropout: an rng is required in training mode")
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)

    def vjp(g):
        _accumulate(a, g * keep, owned=True)

    return _record(a.value * keep, "dropout", (a,), vjp)


def gather_rows(a: Matrix, indices: np.ndarray) -> Matrix:
    """Select rows by index; backward scatter-adds into the source rows."""
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1:
        raise DimensionError(f"gather_rows: indices must be 1-D, got {idx.shape}")
    out = a.value[idx].copy()

    def vjp(g):
        if not a.requires_grad:
            return
        if a.grad is None:
            a.grad = np.zeros_like(a.value)
        np.add.at(a.grad, idx, g)

    return _record(out, "gather_rows", (a,), vjp)


def pairwise_weighted_l1(p: Matrix, w: Matrix) -> Matrix:
    """All-pairs scores s[i,j] = sum_k w[k,0] * |p[i,k] - p[j,k]|.

    Fused so the n x n x d difference tensor never materializes; time is
    O(n^2 d), extra memory O(n^2).
    """
    if w.shape != (p.cols, 1):
        raise DimensionError(
            f"pairwise_weighted_l1: weight {w.shape} does not fit {p.shape}")
    out = _pairwise.pairwise_scores(p.value, w.value.ravel())

    def vjp(g):
        gp, gw = _pairwise.pairwise_backward(p.value, w.value.ravel(), g)
        _accumulate(p, gp, owned=True)
        _accumulate(w, gw.reshape(-1, 1), owned=True)

    return _record(out, "pairwise_weighted_l1", (p, w), vjp)


# ---------------------------------------------------------------------------
# finite-difference checking


def finite_difference(loss_fn: Callable[[], float], params: Sequence[Matrix],
                      step: float = 1e-5) -> list[np.ndarray]:
    """Central-difference gradient of ``loss_fn`` for each parameter entry."""
    grads = []
    for p in params:
        g = np.zeros_like(p.value)
        flat = p.value.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss_fn()
            flat[i] = orig - step
            down = loss_fn()
            flat[i] = orig
            g.ravel()[i] = (up - down) / (2.0 * step)
        grads.append(g)
    return grads


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray,
                       floor: float = 1e-8) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))

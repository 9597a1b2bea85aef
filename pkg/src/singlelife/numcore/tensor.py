"""Minimal reverse-mode tensor tape on top of numpy.

A `Tensor` is an immutable node in an implicit computation graph: every op in
`singlelife.numcore.ops` produces a fresh node holding the result array, links
to its parent nodes, and a closure that routes the output gradient to them.
`backward(loss)` walks the graph once in reverse topological order; calling it
a second time on the same nodes (without re-running the forward pass) is an
error. Leaves created with `requires_grad=True` end up with `.grad` set.

Two precision modes are supported: float32 (training default) and float64
(mandatory for finite-difference gradient checks). Every primitive asserts
its output is finite; NaN/Inf anywhere is a hard `NumericError`.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError, NumericError

FLOAT_DTYPES = (np.float32, np.float64)


def _check_finite(arr: np.ndarray, op: str) -> None:
    # Fast path: a single sum is NaN/Inf iff the array holds one (or the sum
    # overflows, in which case the slow scan below disambiguates).
    if arr.size == 0:
        return
    s = float(arr.sum())
    if s - s == 0.0:
        return
    if not np.isfinite(arr).all():
        bad = int(np.count_nonzero(~np.isfinite(arr)))
        raise NumericError(f"non-finite values ({bad} of {arr.size}) in output of '{op}'")


class Tensor:
    """One node of the computation graph; wraps a read-only numpy array."""

    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward",
                 "_needs_grad", "_back_done", "_grad_owned")

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _backward=None,
                 _op="tensor", dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in FLOAT_DTYPES:
            arr = arr.astype(np.float32)
        _check_finite(arr, _op)
        view = arr.view()
        view.flags.writeable = False
        self.data = view
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name
        self._parents = _parents
        self._backward = _backward
        self._needs_grad = self.requires_grad or any(p._needs_grad for p in _parents)
        self._back_done = False
        self._grad_owned = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def astype(self, dtype) -> "Tensor":
        return Tensor(self.data.astype(dtype), requires_grad=self.requires_grad, name=self.name)

    def accumulate_grad(self, g: np.ndarray) -> None:
        # first gradient is stored by reference (producers never reuse their
        # output buffers); later ones accumulate into an owned copy
        if self.grad is None:
            self.grad = g if g.dtype == self.data.dtype else g.astype(self.data.dtype)
        elif self._grad_owned:
            self.grad += g
        else:
            self.grad = self.grad + g
            self._grad_owned = True

    def backward(self) -> None:
        backward(self)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={tuple(self.shape)}, dtype={self.data.dtype.name}{tag})"


def make_node(data, parents, backward_fn, op: str) -> Tensor:
    """Construct an op-output node; drops the closure when no grad is needed.

    Only gradient-bearing parents are linked: constants stay outside the
    graph, so they can be shared across forward passes (the backward closures
    capture whatever inputs they need directly).
    """
    keep = tuple(p for p in parents if p._needs_grad)
    return Tensor(data, _parents=keep, _backward=backward_fn if keep else None, _op=op)


def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Reverse-mode sweep from a scalar loss; fills `.grad` on trainable leaves.

    The sweep consumes the graph: running it twice over any shared node
    without re-running the forward pass raises `ContractError`.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {tuple(loss.shape)}")
    order = _toposort(loss)
    for node in order:
        if node._back_done:
            raise ContractError("backward called twice on the same graph; re-run the forward pass")
    loss.accumulate_grad(np.ones_like(loss.data))
    for node in reversed(order):
        node._back_done = True
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
        if node._parents and not node.requires_grad:
            node.grad = None  # free intermediate grads, keep leaf grads


def gradients(loss: Tensor, leaves: dict[str, Tensor]) -> dict[str, np.ndarray]:
    """Backward pass returning one gradient per named leaf (zeros if unused)."""
    backward(loss)
    out = {}
    for name, leaf in leaves.items():
        out[name] = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
    return out

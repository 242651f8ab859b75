"""Dense tensors and a reverse-mode differentiation tape.

Tensors are plain C-ordered numpy arrays. A :class:`Node` wraps one array
together with the rule that produced it, so calling :func:`backward` on a
scalar node pushes gradients to every node it depends on.

Element precision is a process-wide setting (float32 by default). The
:func:`precision` context switches it, which is how gradient checks run in
float64.
"""
from __future__ import annotations

import contextlib
import math
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import ContractError, ShapeError

_dtype = np.dtype(np.float32)
_grad_enabled = True


def get_dtype() -> np.dtype:
    return _dtype


def set_dtype(dtype) -> None:
    global _dtype
    dtype = np.dtype(dtype)
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"unsupported element type {dtype}")
    _dtype = dtype


@contextlib.contextmanager
def precision(dtype) -> Iterator[None]:
    previous = _dtype
    set_dtype(dtype)
    try:
        yield
    finally:
        set_dtype(previous)


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Evaluate without recording backward rules."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def tensor_new(shape: Sequence[int], fill=0.0, dtype=None) -> np.ndarray:
    """Build a row-major tensor filled with a constant or from a flat list of values."""
    shape = tuple(int(s) for s in shape)
    if any(s < 1 for s in shape):
        raise ShapeError(f"extents must be positive, got {shape}")
    dtype = np.dtype(dtype) if dtype is not None else _dtype
    if np.isscalar(fill):
        return np.full(shape, fill, dtype=dtype)
    values = np.asarray(fill, dtype=dtype).ravel()
    if values.size != math.prod(shape):
        raise ShapeError(f"{values.size} values do not fill shape {shape}")
    return values.reshape(shape).copy()


class Node:
    """A tensor on the tape.

    ``grad`` is allocated lazily and always has the shape of ``value``.
    Leaves created directly are trainable unless ``requires_grad=False``;
    op outputs require grad when any parent does.
    """

    __slots__ = ("value", "_grad", "op", "parents", "requires_grad", "_backward")

    def __init__(self, value, parents: tuple = (), op: str = "leaf", requires_grad: bool = True):
        if not isinstance(value, np.ndarray):
            value = np.asarray(value, dtype=_dtype)
        self.value = value
        self._grad = None
        self.op = op
        self.parents = parents
        self.requires_grad = requires_grad
        self._backward: Callable[[], None] | None = None

    @property
    def shape(self) -> tuple:
        return self.value.shape

    @property
    def grad(self) -> np.ndarray:
        if self._grad is None:
            self._grad = np.zeros_like(self.value)
        return self._grad

    @grad.setter
    def grad(self, g) -> None:
        self._grad = g

    def accumulate(self, g: np.ndarray) -> None:
        if self._grad is None:
            self._grad = np.array(g, dtype=self.value.dtype, copy=True).reshape(self.value.shape)
        else:
            self._grad += g

    def __repr__(self) -> str:
        return f"Node(op={self.op!r}, shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)


def constant(value) -> Node:
    return Node(np.asarray(value, dtype=_dtype), requires_grad=False)


def as_node(x) -> Node:
    return x if isinstance(x, Node) else constant(x)


def make_node(value: np.ndarray, parents: Sequence[Node], op: str, backward_fn) -> Node:
    """Record an op output. ``backward_fn(out)`` pushes ``out.grad`` into the parents."""
    track = _grad_enabled and any(p.requires_grad for p in parents)
    if not track:
        return Node(value, op=op, requires_grad=False)
    out = Node(value, tuple(parents), op, requires_grad=True)
    out._backward = lambda: backward_fn(out)
    return out


def _reduce_to(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    return np.asarray(g.sum()).reshape(shape)


def _check_broadcast(a: Node, b: Node, op: str) -> None:
    if a.shape != b.shape and a.value.ndim != 0 and b.value.ndim != 0:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


def add(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    _check_broadcast(a, b, "add")

    def backward(out):
        if a.requires_grad:
            a.accumulate(_reduce_to(out.grad, a.shape))
        if b.requires_grad:
            b.accumulate(_reduce_to(out.grad, b.shape))

    return make_node(a.value + b.value, (a, b), "add", backward)


def sub(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    _check_broadcast(a, b, "sub")

    def backward(out):
        if a.requires_grad:
            a.accumulate(_reduce_to(out.grad, a.shape))
        if b.requires_grad:
            b.accumulate(_reduce_to(-out.grad, b.shape))

    return make_node(a.value - b.value, (a, b), "sub", backward)


def mul(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    _check_broadcast(a, b, "mul")

    def backward(out):
        if a.requires_grad:
            a.accumulate(_reduce_to(out.grad * b.value, a.shape))
        if b.requires_grad:
            b.accumulate(_reduce_to(out.grad * a.value, b.shape))

    return make_node(a.value * b.value, (a, b), "mul", backward)


def ew_binary(op: str, a, b) -> Node:
    try:
        fn = {"add": add, "sub": sub, "mul": mul}[op]
    except KeyError:
        raise ValueError(f"unknown elementwise op {op!r}") from None
    return fn(a, b)


def reduce_sum(a) -> Node:
    a = as_node(a)

    def backward(out):
        a.accumulate(np.broadcast_to(out.grad, a.shape))

    return make_node(np.asarray(a.value.sum(), dtype=a.value.dtype), (a,), "sum", backward)


def topological_order(root: Node) -> list[Node]:
    """Parents-before-children order of every node reachable from ``root``."""
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in seen and parent.requires_grad:
                stack.append((parent, False))
    return order


def backward(loss: Node, retain_graph: bool = False) -> None:
    """Populate ``grad`` on every node reachable from the scalar ``loss``.

    Unless ``retain_graph`` is set the tape is released afterwards so a
    training step never keeps the previous step's activations alive.
    """
    if loss.value.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    order = topological_order(loss)
    loss.accumulate(np.ones_like(loss.value))
    for node in reversed(order):
        if node._backward is not None:
            node._backward()
            if not retain_graph:
                node._backward = None
                node.parents = ()


def grad_check(f: Callable[[Node], Node], x, eps: float = 1e-6) -> float:
    """Largest relative disagreement between backprop and central differences.

    ``f`` maps a node to a scalar node. The check runs in float64; the error
    for element i is ``|analytic - numeric| / max(1, |numeric|)``.
    """
    with precision(np.float64):
        x = np.array(x, dtype=np.float64)
        leaf = Node(x.copy())
        out = f(leaf)
        backward(out)
        analytic = leaf.grad.copy()

        worst = 0.0
        flat = x.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            with no_grad():
                f_plus = float(f(Node(x.copy(), requires_grad=False)).value)
            flat[i] = orig - eps
            with no_grad():
                f_minus = float(f(Node(x.copy(), requires_grad=False)).value)
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            err = abs(analytic.reshape(-1)[i] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
    return worst

"""Layer operations recorded on the tape: convolution, pooling, upsampling, activations."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ShapeError
from .tensor import Node, as_node, make_node


@dataclass(frozen=True)
class ConvSpec:
    in_channels: int
    out_channels: int
    kernel: int = 3
    stride: int = 1
    padding: str = "same"

    def __post_init__(self):
        if self.in_channels < 1 or self.out_channels < 1:
            raise ShapeError("channel counts must be positive")
        if self.kernel < 1 or self.stride < 1:
            raise ShapeError("kernel and stride must be >= 1")
        if self.padding not in ("same", "none"):
            raise ValueError(f"padding must be 'same' or 'none', not {self.padding!r}")
        if self.padding == "same" and (self.kernel % 2 == 0 or self.stride != 1):
            raise ShapeError("same padding needs an odd kernel and stride 1")

    @property
    def pad(self) -> int:
        return (self.kernel - 1) // 2 if self.padding == "same" else 0

    @property
    def weight_shape(self) -> tuple:
        return (self.out_channels, self.in_channels, self.kernel, self.kernel)


def conv2d(x, weight, bias, spec: ConvSpec) -> Node:
    """Zero-padded cross-correlation plus per-channel bias, via im2col + matmul."""
    x, weight, bias = as_node(x), as_node(weight), as_node(bias)
    if x.value.ndim != 4 or x.shape[1] != spec.in_channels:
        raise ShapeError(f"conv2d expects N x {spec.in_channels} x H x W input, got {x.shape}")
    if weight.shape != spec.weight_shape:
        raise ShapeError(f"conv2d weight shape {weight.shape} != {spec.weight_shape}")
    if bias.shape != (spec.out_channels,):
        raise ShapeError(f"conv2d bias shape {bias.shape} != ({spec.out_channels},)")
    n, _, h, w = x.shape
    k, s, p = spec.kernel, spec.stride, spec.pad
    ho, wo = (h + 2 * p - k) // s + 1, (w + 2 * p - k) // s + 1
    if ho < 1 or wo < 1:
        raise ShapeError(f"input {h}x{w} too small for kernel {k}")

    cols = kernels.im2col(x.value, k, s, p)  # (cin*k*k, n*ho*wo)
    w2 = weight.value.reshape(spec.out_channels, -1)
    out = (w2 @ cols).reshape(spec.out_channels, n, ho, wo).transpose(1, 0, 2, 3)
    out = out + bias.value.reshape(1, -1, 1, 1)

    def backward(node):
        g = node.grad.transpose(1, 0, 2, 3).reshape(spec.out_channels, n * ho * wo)
        if weight.requires_grad:
            weight.accumulate((g @ cols.T).reshape(weight.shape))
        if bias.requires_grad:
            bias.accumulate(g.sum(axis=1))
        if x.requires_grad:
            x.accumulate(kernels.col2im(w2.T @ g, x.shape, k, s, p))

    return make_node(out, (x, weight, bias), "conv2d", backward)


def maxpool2d(x, window: int = 2) -> Node:
    x = as_node(x)
    if window != 2:
        raise ShapeError("only 2x2 pooling is supported")
    if x.value.ndim != 4 or x.shape[2] % 2 or x.shape[3] % 2:
        raise ShapeError(f"maxpool2d needs even spatial extents, got {x.shape}")
    out, idx = kernels.maxpool2x2(x.value)

    def backward(node):
        x.accumulate(kernels.maxpool2x2_backward(node.grad, idx))

    return make_node(out, (x,), "maxpool2d", backward)


def conv_transpose2d(x, weight) -> Node:
    """2x2, stride-2 transposed convolution; weight is ``Cin x Cout x 2 x 2``.

    Every input pixel writes ``value * kernel`` into its own 2x2 output block.
    """
    x, weight = as_node(x), as_node(weight)
    if x.value.ndim != 4 or weight.value.ndim != 4 or weight.shape[2:] != (2, 2):
        raise ShapeError(f"conv_transpose2d shapes {x.shape}, {weight.shape}")
    n, cin, h, w = x.shape
    if weight.shape[0] != cin:
        raise ShapeError(f"weight expects {weight.shape[0]} input channels, input has {cin}")
    cout = weight.shape[1]
    xf = x.value.reshape(n, cin, h * w)
    wf = weight.value.reshape(cin, cout * 4)
    blocks = np.matmul(wf.T, xf)  # n, cout*4, h*w
    out = (blocks.reshape(n, cout, 2, 2, h, w).transpose(0, 1, 4, 2, 5, 3)
           .reshape(n, cout, 2 * h, 2 * w))

    def backward(node):
        g = (node.grad.reshape(n, cout, h, 2, w, 2).transpose(0, 1, 3, 5, 2, 4)
             .reshape(n, cout * 4, h * w))
        if weight.requires_grad:
            weight.accumulate(np.tensordot(xf, g, axes=([0, 2], [0, 2])).reshape(weight.shape))
        if x.requires_grad:
            x.accumulate(np.matmul(wf, g).reshape(x.shape))

    return make_node(np.ascontiguousarray(out), (x, weight), "conv_transpose2d", backward)


def concat_channels(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    if a.value.ndim != 4 or b.value.ndim != 4:
        raise ShapeError("concat_channels expects 4-d inputs")
    if (a.shape[0], *a.shape[2:]) != (b.shape[0], *b.shape[2:]):
        raise ShapeError(f"cannot concatenate {a.shape} and {b.shape} along channels")
    ca = a.shape[1]

    def backward(node):
        if a.requires_grad:
            a.accumulate(node.grad[:, :ca])
        if b.requires_grad:
            b.accumulate(node.grad[:, ca:])

    return make_node(np.concatenate([a.value, b.value], axis=1), (a, b), "concat", backward)


def relu(x) -> Node:
    x = as_node(x)
    mask = x.value > 0

    def backward(node):
        x.accumulate(node.grad * mask)

    return make_node(np.where(mask, x.value, 0).astype(x.value.dtype), (x,), "relu", backward)


def sigmoid_array(z: np.ndarray) -> np.ndarray:
    """Overflow-free logistic function."""
    z = np.asarray(z)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1 / (1 + e), e / (1 + e)).astype(z.dtype, copy=False)


def sigmoid(x) -> Node:
    x = as_node(x)
    s = sigmoid_array(x.value)

    def backward(node):
        x.accumulate(node.grad * s * (1 - s))

    return make_node(s, (x,), "sigmoid", backward)

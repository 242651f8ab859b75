"""Binary cross-entropy loss and the monitored segmentation metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ShapeError
from .nn import sigmoid_array
from .tensor import Node, as_node, make_node


@dataclass(frozen=True)
class MetricTriple:
    accuracy: float
    loss: float
    iou: float

    def __post_init__(self):
        for name in ("accuracy", "loss", "iou"):
            if not math.isfinite(getattr(self, name)):
                raise ContractError(f"{name} is not finite")
        if not (0.0 <= self.accuracy <= 1.0 and 0.0 <= self.iou <= 1.0):
            raise ContractError(f"accuracy/iou outside [0, 1]: {self}")


def _check_pair(a, b, what):
    if a.shape != b.shape:
        raise ShapeError(f"{what}: shapes {a.shape} and {b.shape} differ")


def bce_with_logits(logits, targets) -> Node:
    """Mean binary cross-entropy, computed from logits in overflow-safe form.

    Per element: ``max(z, 0) - z*y + log(1 + exp(-|z|))``.
    """
    z = as_node(logits)
    y = np.asarray(targets)
    _check_pair(z.value, y, "bce_with_logits")
    if not np.all((y == 0) | (y == 1)):
        raise ContractError("bce_with_logits targets must be 0 or 1")
    y = y.astype(z.value.dtype, copy=False)
    zv = z.value
    per_elem = np.maximum(zv, 0) - zv * y + np.log1p(np.exp(-np.abs(zv)))
    value = np.asarray(per_elem.mean(dtype=zv.dtype), dtype=zv.dtype)

    def backward(node):
        z.accumulate(node.grad * (sigmoid_array(zv) - y) / zv.size)

    return make_node(value, (z,), "bce", backward)


def pixel_accuracy(probs, targets, threshold: float = 0.5) -> float:
    probs, targets = np.asarray(probs), np.asarray(targets)
    _check_pair(probs, targets, "pixel_accuracy")
    correct = np.count_nonzero((probs >= threshold) == (targets == 1))
    return correct / probs.size


def iou(probs, targets, threshold: float = 0.5, eps: float = 1e-6) -> float:
    """Hard IoU of the thresholded prediction; two empty sets score 1."""
    probs, targets = np.asarray(probs), np.asarray(targets)
    _check_pair(probs, targets, "iou")
    pred, true = probs >= threshold, targets == 1
    inter = np.count_nonzero(pred & true)
    union = np.count_nonzero(pred | true)
    return (inter + eps) / (union + eps)

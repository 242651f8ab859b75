import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from terraseg.errors import ContractError, ShapeError
from terraseg.metrics import MetricTriple, bce_with_logits, iou, pixel_accuracy
from terraseg.tensor import Node, backward, grad_check, precision


def count_oracle(probs, targets, threshold=0.5, eps=1e-6):
    """Per-pixel counting over nested lists; returns (accuracy, iou)."""
    correct = inter = union = total = 0
    for prow, trow in zip(probs, targets):
        for p, t in zip(prow, trow):
            pred, true = p >= threshold, t == 1
            total += 1
            correct += pred == true
            inter += pred and true
            union += pred or true
    return correct / total, (inter + eps) / (union + eps)


class TestBCE:
    def test_zero_logit(self):
        with precision(np.float64):
            assert float(bce_with_logits(np.array([0.0]), np.array([1.0])).value) == pytest.approx(math.log(2), abs=1e-12)

    def test_saturation(self):
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            v = float(bce_with_logits(np.array([100.0, -100.0]), np.array([1.0, 0.0])).value)
        assert math.isfinite(v) and v < 1e-30

    def test_symmetry(self, rs):
        z = rs.normal(size=50) * 5
        with precision(np.float64):
            for zi in z:
                a = bce_with_logits(np.array([zi]), np.array([0.0])).value
                b = bce_with_logits(np.array([-zi]), np.array([1.0])).value
                assert float(a) == pytest.approx(float(b), rel=1e-14, abs=1e-300)

    def test_matches_naive_formula(self, rs):
        z, y = rs.normal(size=40), rs.integers(0, 2, 40).astype(float)
        s = 1 / (1 + np.exp(-z))
        naive = -np.mean(y * np.log(s) + (1 - y) * np.log(1 - s))
        with precision(np.float64):
            assert float(bce_with_logits(z, y).value) == pytest.approx(naive, rel=1e-12)

    def test_gradient(self, rs):
        y = rs.integers(0, 2, (2, 1, 3, 3)).astype(float)
        assert grad_check(lambda z: bce_with_logits(z, y), rs.normal(size=(2, 1, 3, 3)) * 3) < 1e-6

    def test_non_binary_target(self):
        with pytest.raises(ContractError):
            bce_with_logits(np.zeros(2), np.array([0.0, 0.5]))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            bce_with_logits(np.zeros(2), np.zeros(3))


class TestAccuracy:
    def test_perfect(self):
        t = np.array([0.0, 1, 1, 0])
        assert pixel_accuracy(t, t) == 1.0

    def test_inverted(self):
        t = np.array([0.0, 1, 1, 0])
        assert pixel_accuracy(1 - t, t) == 0.0

    def test_half(self):
        assert pixel_accuracy(np.array([0.9, 0.1, 0.9, 0.1]), np.array([1, 0, 0, 1])) == 0.5

    def test_complement(self, rs):
        p = rs.random((8, 8))
        t = rs.integers(0, 2, (8, 8))
        assert pixel_accuracy(p, t) + pixel_accuracy(1 - p, t) == pytest.approx(1.0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            pixel_accuracy(np.zeros(3), np.zeros(4))


class TestIoU:
    def test_identical(self):
        t = np.array([1.0, 1, 0, 0])
        assert iou(t, t) == pytest.approx(1.0)

    def test_disjoint(self):
        assert iou(np.array([1.0, 1, 0, 0]), np.array([0, 0, 1, 1])) == pytest.approx(0, abs=1e-6)

    def test_half(self):
        t = np.array([1, 1, 1, 1, 0, 0])
        p = np.array([0.9, 0.9, 0.1, 0.1, 0.1, 0.1])
        assert count_oracle([p], [t])[1] == pytest.approx(0.5, abs=1e-6)
        assert iou(p, t) == pytest.approx(0.5, abs=1e-6)

    def test_both_empty(self):
        assert iou(np.zeros(4), np.zeros(4)) == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            iou(np.zeros(3), np.zeros(4))


binary16 = arrays(np.int8, (16, 16), elements=st.integers(0, 1))


@settings(max_examples=60, deadline=None)
@given(a=binary16, b=binary16)
def test_iou_symmetric_and_bounded(a, b):
    v = iou(a.astype(float), b)
    assert v == iou(b.astype(float), a)
    assert 0.0 <= v <= 1.0


@settings(max_examples=60, deadline=None)
@given(p=arrays(np.float64, (16, 16), elements=st.floats(0, 1)), t=binary16)
def test_oracle_equivalence(p, t):
    acc, j = count_oracle(p.tolist(), t.tolist())
    assert pixel_accuracy(p, t) == acc
    assert iou(p, t) == j


def test_metric_triple_invariants():
    MetricTriple(0.5, 0.1, 0.3)
    with pytest.raises(ContractError):
        MetricTriple(1.5, 0.1, 0.3)
    with pytest.raises(ContractError):
        MetricTriple(0.5, float("nan"), 0.3)

"""Low-level kernels with a compiled core and a numpy fallback.

The compiled extension is used when it was built and importable; set
``TERRASEG_PURE_PYTHON=1`` to force the numpy path. ``BACKEND`` names the
active implementation.
"""
import os

import numpy as np

from . import _fallback

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

if _core is not None and not os.environ.get("TERRASEG_PURE_PYTHON"):
    _impl = _core
    BACKEND = "cython"
else:
    _impl = _fallback
    BACKEND = "numpy"


def available_backends():
    return {"numpy": _fallback, **({"cython": _core} if _core is not None else {})}


def im2col(x, k, stride, pad):
    """``(N, C, H, W)`` -> ``(C*k*k, N*Ho*Wo)`` patch matrix.

    Rows are ordered (c, ki, kj), columns (n, ho, wo).
    """
    return _impl.im2col(np.ascontiguousarray(x), k, stride, pad)


def col2im(cols, shape, k, stride, pad):
    """Adjoint of :func:`im2col`: scatter-add patches back into an ``shape`` image."""
    return _impl.col2im(np.ascontiguousarray(cols), tuple(shape), k, stride, pad)


def maxpool2x2(x):
    """Non-overlapping 2x2 max; also returns the in-window argmax (0..3, row-major)."""
    return _impl.maxpool2x2(np.ascontiguousarray(x))


def maxpool2x2_backward(grad_out, idx):
    return _impl.maxpool2x2_backward(np.ascontiguousarray(grad_out), np.ascontiguousarray(idx))

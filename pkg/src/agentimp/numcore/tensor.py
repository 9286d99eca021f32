"""Dense float64 building blocks with explicit shapes.

A ``Tensor2`` is a C-contiguous 2-D ``float64`` ndarray. Nothing here
broadcasts implicitly: shapes must line up exactly or a ``ShapeError`` is
raised.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from agentimp.errors import NumericError, ShapeError

Tensor2 = np.ndarray


def check_finite(a: np.ndarray, what: str = "value") -> np.ndarray:
    if not np.isfinite(a).all():
        raise NumericError(f"non-finite entries in {what}")
    return a


def as_tensor2(a, what: str = "tensor") -> Tensor2:
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{what} must be 2-D, got shape {arr.shape}")
    return check_finite(arr, what)


def as_vector(v, what: str = "vector") -> np.ndarray:
    arr = np.ascontiguousarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"{what} must be 1-D, got shape {arr.shape}")
    return arr


def matmul(a: Tensor2, b: Tensor2) -> Tensor2:
    a = as_tensor2(a, "left operand")
    b = as_tensor2(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
    return check_finite(a @ b, "matmul result")


def softmax_row(v) -> np.ndarray:
    v = as_vector(v)
    if v.size == 0:
        raise ShapeError("softmax of empty vector")
    check_finite(v, "softmax input")
    e = np.exp(v - v.max())
    return e / e.sum()


def softmax_rows(a: Tensor2) -> Tensor2:
    a = as_tensor2(a)
    if a.shape[1] == 0:
        raise ShapeError("softmax of empty rows")
    e = np.exp(a - a.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def l2_norm(v) -> float:
    v = as_vector(v)
    if v.size == 0:
        raise ShapeError("l2_norm of empty vector")
    return float(np.sqrt(np.dot(v, v)))


def relu(v: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(v, dtype=np.float64), 0.0)


def concat(*vs) -> np.ndarray:
    return np.concatenate([as_vector(v) for v in vs])


def mlp_forward(layers: Sequence[tuple[np.ndarray, np.ndarray]], v, activate_last: bool = True) -> np.ndarray:
    """Run ``v`` through a stack of ``(W, b)`` affine layers with ReLU after each.

    ``W`` has shape (in, out) and ``b`` shape (out,). With ``activate_last=False``
    the final layer stays linear.
    """
    h = as_vector(v)
    for n, (w, b) in enumerate(layers):
        w = np.asarray(w, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64).reshape(-1)
        if w.ndim != 2 or w.shape[0] != h.size or b.size != w.shape[1]:
            raise ShapeError(f"layer {n}: width mismatch (input {h.size}, W {w.shape}, b {b.shape})")
        h = h @ w + b
        if activate_last or n < len(layers) - 1:
            h = relu(h)
    return check_finite(h, "mlp output")

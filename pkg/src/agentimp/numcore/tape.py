"""Minimal reverse-mode autodiff over 2-D float64 arrays.

Every op appends a node holding its value, its parents and a closure mapping
the upstream gradient to parent gradients. ``backward`` walks the nodes in
reverse creation order, so the tape is only valid for a single pass; build a
new ``GradTape`` per forward.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from agentimp.errors import ShapeError
from agentimp.numcore import kernels
from agentimp.numcore.tensor import as_tensor2, check_finite


class Node:
    __slots__ = ("value", "parents", "vjp", "index", "name")

    def __init__(self, value, parents=(), vjp=None, index=-1, name=None):
        self.value = value
        self.parents = parents
        self.vjp = vjp
        self.index = index
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        label = self.name or f"#{self.index}"
        return f"Node({label}, shape={self.value.shape})"


class GradTape:
    def __init__(self):
        self.nodes: list[Node] = []
        self.params: dict[str, Node] = {}

    # -- leaves ---------------------------------------------------------
    def _push(self, value, parents=(), vjp: Callable | None = None, name=None) -> Node:
        check_finite(value, name or "op result")
        node = Node(value, tuple(parents), vjp, len(self.nodes), name)
        self.nodes.append(node)
        return node

    def param(self, name: str, value) -> Node:
        if name in self.params:
            raise ValueError(f"parameter {name!r} registered twice")
        node = self._push(as_tensor2(value, name), name=name)
        self.params[name] = node
        return node

    def const(self, value, name=None) -> Node:
        return self._push(as_tensor2(value, name or "constant"), name=name)

    # -- elementwise / structural ----------------------------------------
    @staticmethod
    def _same(a: Node, b: Node, op: str):
        if a.shape != b.shape:
            raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")

    def add(self, a: Node, b: Node) -> Node:
        self._same(a, b, "add")
        return self._push(a.value + b.value, (a, b), lambda g: (g, g))

    def sub(self, a: Node, b: Node) -> Node:
        self._same(a, b, "sub")
        return self._push(a.value - b.value, (a, b), lambda g: (g, -g))

    def mul(self, a: Node, b: Node) -> Node:
        self._same(a, b, "mul")
        av, bv = a.value, b.value
        return self._push(av * bv, (a, b), lambda g: (g * bv, g * av))

    def scale(self, a: Node, c: float) -> Node:
        c = float(c)
        return self._push(a.value * c, (a,), lambda g: (g * c,))

    def add_row(self, a: Node, row: Node) -> Node:
        """Add a (1, C) row to every row of ``a``."""
        if row.shape[0] != 1 or row.shape[1] != a.shape[1]:
            raise ShapeError(f"add_row: row {row.shape} does not fit {a.shape}")
        return self._push(a.value + row.value, (a, row), lambda g: (g, g.sum(axis=0, keepdims=True)))

    def matmul(self, a: Node, b: Node) -> Node:
        if a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
        av, bv = a.value, b.value
        return self._push(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))

    def relu(self, a: Node) -> Node:
        mask = a.value > 0.0
        return self._push(np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,))

    def exp(self, a: Node) -> Node:
        with np.errstate(over="ignore"):
            out = np.exp(a.value)
        return self._push(out, (a,), lambda g: (g * out,))

    def softmax_rows(self, a: Node) -> Node:
        z = a.value - a.value.max(axis=1, keepdims=True)
        e = np.exp(z)
        p = e / e.sum(axis=1, keepdims=True)

        def vjp(g):
            return (p * (g - (g * p).sum(axis=1, keepdims=True)),)

        return self._push(p, (a,), vjp)

    def concat_cols(self, parts: Sequence[Node]) -> Node:
        rows = {p.shape[0] for p in parts}
        if len(rows) != 1:
            raise ShapeError(f"concat_cols: row counts differ {sorted(rows)}")
        widths = np.cumsum([0] + [p.shape[1] for p in parts])

        def vjp(g):
            return tuple(g[:, widths[n]:widths[n + 1]] for n in range(len(parts)))

        return self._push(np.concatenate([p.value for p in parts], axis=1), tuple(parts), vjp)

    def row_slice(self, a: Node, lo: int, hi: int) -> Node:
        if not 0 <= lo < hi <= a.shape[0]:
            raise ShapeError(f"row_slice [{lo}:{hi}) out of range for {a.shape}")

        def vjp(g):
            full = np.zeros_like(a.value)
            full[lo:hi] = g
            return (full,)

        return self._push(np.ascontiguousarray(a.value[lo:hi]), (a,), vjp)

    # -- reductions -----------------------------------------------------
    def sum(self, a: Node) -> Node:
        shape = a.shape
        return self._push(np.array([[a.value.sum()]]), (a,), lambda g: (np.full(shape, g[0, 0]),))

    def mean(self, a: Node) -> Node:
        shape = a.shape
        n = a.value.size
        return self._push(np.array([[a.value.sum() / n]]), (a,), lambda g: (np.full(shape, g[0, 0] / n),))

    def pointwise_l2(self, pred: Node, target: Node, eps: float = 1e-6) -> Node:
        """Per-waypoint distances for rows laid out as x0, y0, x1, y1, ...

        Returns an (M, T) node with ``sqrt(dx^2 + dy^2 + eps)``; ``eps`` keeps
        the gradient finite at zero error.
        """
        self._same(pred, target, "pointwise_l2")
        if pred.shape[1] % 2:
            raise ShapeError("pointwise_l2 expects an even number of columns")
        diff = (pred.value - target.value).reshape(pred.shape[0], -1, 2)
        with np.errstate(over="ignore", invalid="ignore"):
            dist = np.sqrt((diff * diff).sum(axis=2) + eps)

        def vjp(g):
            dd = (diff * (g / dist)[:, :, None]).reshape(pred.shape)
            return (dd, -dd)

        return self._push(dist, (pred, target), vjp)

    # -- fused interaction ops -------------------------------------------
    def pair_relu_sum(self, a: Node, c: Node, w: Node, deltas: np.ndarray, tgt: np.ndarray, src: np.ndarray) -> Node:
        """``S_i = sum_{(i,j) in pairs} relu(A_i + C_j + deltas_ij @ W)``.

        ``deltas`` is a constant (P, 2) array aligned with ``tgt``/``src``.
        """
        if a.shape != c.shape or w.shape != (2, a.shape[1]):
            raise ShapeError(f"pair_relu_sum: shapes A{a.shape} C{c.shape} W{w.shape}")
        deltas = np.ascontiguousarray(deltas, dtype=np.float64).reshape(-1, 2)
        tgt = np.ascontiguousarray(tgt, dtype=np.int64)
        src = np.ascontiguousarray(src, dtype=np.int64)
        if not (deltas.shape[0] == tgt.shape[0] == src.shape[0]):
            raise ShapeError("pair_relu_sum: pair arrays differ in length")
        m = a.shape[0]
        s, pre = kernels.pair_relu_sum_fwd(a.value, c.value, deltas, w.value, tgt, src)

        def vjp(g):
            return kernels.pair_relu_sum_bwd(np.ascontiguousarray(g), pre, deltas, tgt, src, m)

        return self._push(s, (a, c, w), vjp)

    def segment_attention(self, q: Node, k: Node, v: Node, seg: np.ndarray, scale: float) -> Node:
        """Row-block softmax(Q K^T * scale) V; ``seg`` holds block offsets."""
        if q.shape != k.shape or q.shape[0] != v.shape[0]:
            raise ShapeError(f"segment_attention: shapes Q{q.shape} K{k.shape} V{v.shape}")
        seg = np.ascontiguousarray(seg, dtype=np.int64)
        if seg[0] != 0 or seg[-1] != q.shape[0] or np.any(np.diff(seg) <= 0):
            raise ShapeError("segment_attention: bad segment offsets")
        y, wts, woff = kernels.segment_attention_fwd(q.value, k.value, v.value, seg, float(scale))

        def vjp(g):
            return kernels.segment_attention_bwd(np.ascontiguousarray(g), q.value, k.value, v.value, wts, seg, woff, float(scale))

        return self._push(y, (q, k, v), vjp)

    # -- gradients ------------------------------------------------------
    def backward(self, loss: Node) -> dict[str, np.ndarray]:
        if loss.shape != (1, 1):
            raise ShapeError(f"backward needs a scalar (1, 1) loss, got {loss.shape}")
        grads: dict[int, np.ndarray] = {loss.index: np.ones((1, 1))}
        for node in reversed(self.nodes[: loss.index + 1]):
            if node.vjp is None:
                continue
            g = grads.pop(node.index, None)
            if g is None:
                continue
            for parent, pg in zip(node.parents, node.vjp(g)):
                if parent.index in grads:
                    grads[parent.index] = grads[parent.index] + pg
                else:
                    grads[parent.index] = pg
        out = {}
        for name, node in self.params.items():
            g = grads.get(node.index)
            out[name] = np.zeros_like(node.value) if g is None else check_finite(np.asarray(g, dtype=np.float64), f"grad {name}")
        return out

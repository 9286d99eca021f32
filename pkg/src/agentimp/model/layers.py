"""Interaction layers and their attention-vector traces.

Both layers fit ``y_i = f(x_i) + sum_{j != i} g(x_i, x_j) / normalizer_i``:

* LaneGCN: ``y_i = x_i W0 + sum_{j != i} relu(concat(x_i, d_ij, x_j) W1) W2``,
  so ``f(x_i) = x_i W0``, ``g = relu(...) W2`` and the normalizer is 1.
* Transformer: ``y = softmax(Q K^T / sqrt(d)) V``. With
  ``w_ij = exp(q_i . k_j / sqrt(d) - m_i)`` (``m_i`` the row max),
  ``g(x_i, x_j) = w_ij v_j`` and ``normalizer_i = sum_k w_ik``; ``f(x_i)`` is the
  ``j = i`` term. Shifting by ``m_i`` rescales g and the normalizer by the same
  per-target factor, so g / normalizer is the softmax contribution exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from agentimp.errors import ShapeError
from agentimp.numcore import kernels
from agentimp.numcore.tensor import as_tensor2, check_finite


def _split_w1(w1: np.ndarray, f: int):
    if w1.shape[0] != 2 * f + 2:
        raise ShapeError(f"W1 has {w1.shape[0]} rows, expected {2 * f + 2} for width {f}")
    return w1[:f], w1[f:f + 2], w1[f + 2:]


def _check_deltas(deltas: np.ndarray, n: int) -> np.ndarray:
    deltas = np.asarray(deltas, dtype=np.float64)
    if deltas.shape != (n, n, 2):
        raise ShapeError(f"deltas must be ({n}, {n}, 2), got {deltas.shape}")
    return deltas


def lanegcn_layer(x, deltas, w0, w1, w2) -> np.ndarray:
    """LaneGCN agent-to-agent attention for one scene.

    ``deltas[i, j]`` is position(j) - position(i). The neighbour sum skips
    ``j == i``.
    """
    x = as_tensor2(x, "x")
    n, f = x.shape
    deltas = _check_deltas(deltas, n)
    wa, wd, wc = _split_w1(np.asarray(w1, dtype=np.float64), f)
    if w0.shape != (f, f) or w2.shape != (wa.shape[1], f):
        raise ShapeError(f"lanegcn weights do not fit width {f}: W0{w0.shape} W2{w2.shape}")
    tgt, src = np.nonzero(~np.eye(n, dtype=bool))
    s, _ = kernels.pair_relu_sum_fwd(
        x @ wa, x @ wc, np.ascontiguousarray(deltas[tgt, src]), np.ascontiguousarray(wd), tgt.astype(np.int64), src.astype(np.int64)
    )
    return check_finite(x @ w0 + s @ w2, "lanegcn output")


def transformer_layer(x, q, k, v) -> np.ndarray:
    x = as_tensor2(x, "x")
    n, f = x.shape
    if q.shape[0] != f or k.shape != q.shape or v.shape[0] != f:
        raise ShapeError(f"transformer weights do not fit width {f}: Q{q.shape} K{k.shape} V{v.shape}")
    y, _, _ = kernels.segment_attention_fwd(x @ q, x @ k, x @ v, np.array([0, n], dtype=np.int64), 1.0 / math.sqrt(q.shape[1]))
    return check_finite(y, "transformer output")


@dataclass
class LayerTrace:
    """Attention vectors of one layer for one scene.

    ``g[i, j]`` is the attention vector from agent j to agent i (width F);
    ``normalizer[i]`` divides every ``g[i, :]``; ``self_term[i]`` is f(x_i).
    """

    kind: str
    g: np.ndarray
    normalizer: np.ndarray
    self_term: np.ndarray

    def contribution(self, i: int, j: int) -> np.ndarray:
        return self.g[i, j] / self.normalizer[i]

    def reconstruct(self) -> np.ndarray:
        """``f(x_i) + sum_{j != i} g_ij / normalizer_i`` for every i."""
        n = self.g.shape[0]
        off = ~np.eye(n, dtype=bool)
        total = np.zeros_like(self.self_term)
        for i in range(n):
            acc = np.zeros(self.g.shape[2])
            for j in range(n):
                if off[i, j]:
                    acc = acc + self.g[i, j]
            total[i] = self.self_term[i] + acc / self.normalizer[i]
        return total


def lanegcn_trace(x, deltas, w0, w1, w2) -> LayerTrace:
    x = np.asarray(x, dtype=np.float64)
    n, f = x.shape
    deltas = _check_deltas(deltas, n)
    g = np.zeros((n, n, w2.shape[1]))
    for i in range(n):
        for j in range(n):
            if i != j:
                h = np.maximum(np.concatenate([x[i], deltas[i, j], x[j]]) @ w1, 0.0)
                g[i, j] = h @ w2
    return LayerTrace("lanegcn", g, np.ones(n), x @ w0)


def transformer_trace(x, q, k, v) -> LayerTrace:
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    logits = (x @ q) @ (x @ k).T / math.sqrt(q.shape[1])
    w = np.exp(logits - logits.max(axis=1, keepdims=True))
    vals = x @ v
    g = w[:, :, None] * vals[None, :, :]
    normalizer = w.sum(axis=1)
    self_term = g[np.arange(n), np.arange(n)] / normalizer[:, None]
    return LayerTrace("transformer", g, normalizer, self_term)


@dataclass
class AttentionTrace:
    """Per-layer traces for one scene; index 0 of ``agent_ids`` is the ego."""

    agent_ids: list
    layers: list

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def index_of(self, agent_id: int) -> int:
        try:
            return self.agent_ids.index(agent_id)
        except ValueError:
            raise KeyError(f"agent {agent_id} not in trace") from None

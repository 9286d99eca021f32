"""Fused interaction kernels: numba loops plus numpy reference versions.

``pair_relu_sum`` is the LaneGCN-style pairwise message sum
``S_i = sum_j relu(A_i + C_j + D_ij W)`` over an explicit pair list.
``segment_attention`` is scaled dot-product attention restricted to blocks of
consecutive rows (one block per scene).

The public entry points dispatch on ``agentimp._accel.USE_NUMBA``; the
``*_nb`` / ``*_np`` variants are exposed for parity tests and benchmarks.
"""

from __future__ import annotations

import math

import numpy as np

from agentimp import _accel
from agentimp._accel import njit

# --------------------------------------------------------------------------
# pairwise relu sum
# --------------------------------------------------------------------------


@njit
def _pair_relu_sum_fwd_nb(a, c, d, w, tgt, src):
    m, h = a.shape
    p = tgt.shape[0]
    s = np.zeros((m, h))
    pre = np.empty((p, h))
    for k in range(p):
        i = tgt[k]
        j = src[k]
        d0 = d[k, 0]
        d1 = d[k, 1]
        for u in range(h):
            z = a[i, u] + c[j, u] + (d0 * w[0, u] + d1 * w[1, u])
            pre[k, u] = z
            if z > 0.0:
                s[i, u] += z
    return s, pre


@njit
def _pair_relu_sum_bwd_nb(ds, pre, d, tgt, src, m):
    p, h = pre.shape
    da = np.zeros((m, h))
    dc = np.zeros((m, h))
    dw = np.zeros((2, h))
    for k in range(p):
        i = tgt[k]
        j = src[k]
        for u in range(h):
            if pre[k, u] > 0.0:
                g = ds[i, u]
                da[i, u] += g
                dc[j, u] += g
                dw[0, u] += d[k, 0] * g
                dw[1, u] += d[k, 1] * g
    return da, dc, dw


def _pair_relu_sum_fwd_np(a, c, d, w, tgt, src):
    pre = a[tgt] + c[src] + (d[:, :1] * w[0] + d[:, 1:2] * w[1])
    s = np.zeros_like(a)
    np.add.at(s, tgt, np.maximum(pre, 0.0))
    return s, pre


def _pair_relu_sum_bwd_np(ds, pre, d, tgt, src, m):
    dpre = ds[tgt] * (pre > 0.0)
    da = np.zeros((m, pre.shape[1]))
    dc = np.zeros((m, pre.shape[1]))
    np.add.at(da, tgt, dpre)
    np.add.at(dc, src, dpre)
    dw = np.stack([(d[:, 0:1] * dpre).sum(axis=0), (d[:, 1:2] * dpre).sum(axis=0)])
    return da, dc, dw


def pair_relu_sum_fwd(a, c, d, w, tgt, src, use_numba=None):
    use_numba = _accel.USE_NUMBA if use_numba is None else use_numba
    fn = _pair_relu_sum_fwd_nb if use_numba else _pair_relu_sum_fwd_np
    return fn(a, c, d, w, tgt, src)


def pair_relu_sum_bwd(ds, pre, d, tgt, src, m, use_numba=None):
    use_numba = _accel.USE_NUMBA if use_numba is None else use_numba
    fn = _pair_relu_sum_bwd_nb if use_numba else _pair_relu_sum_bwd_np
    return fn(ds, pre, d, tgt, src, m)


# --------------------------------------------------------------------------
# block-diagonal scaled dot-product attention
# --------------------------------------------------------------------------


def weight_offsets(seg: np.ndarray) -> np.ndarray:
    sizes = np.diff(seg)
    return np.concatenate([[0], np.cumsum(sizes * sizes)]).astype(np.int64)


@njit
def _segment_attention_fwd_nb(q, k, v, seg, woff, scale):
    m, dk = q.shape
    f = v.shape[1]
    y = np.zeros((m, f))
    wts = np.empty(woff[-1])
    row = np.empty(m)
    for s in range(seg.shape[0] - 1):
        lo = seg[s]
        n = seg[s + 1] - lo
        base = woff[s]
        for a in range(n):
            mx = -np.inf
            for b in range(n):
                z = 0.0
                for u in range(dk):
                    z += q[lo + a, u] * k[lo + b, u]
                z *= scale
                row[b] = z
                if z > mx:
                    mx = z
            tot = 0.0
            for b in range(n):
                e = math.exp(row[b] - mx)
                row[b] = e
                tot += e
            for b in range(n):
                p = row[b] / tot
                wts[base + a * n + b] = p
                for u in range(f):
                    y[lo + a, u] += p * v[lo + b, u]
    return y, wts


@njit
def _segment_attention_bwd_nb(dy, q, k, v, wts, seg, woff, scale):
    m, dk = q.shape
    f = v.shape[1]
    dq = np.zeros((m, dk))
    dkk = np.zeros((m, dk))
    dv = np.zeros((m, f))
    da = np.empty(m)
    for s in range(seg.shape[0] - 1):
        lo = seg[s]
        n = seg[s + 1] - lo
        base = woff[s]
        for a in range(n):
            dot = 0.0
            for b in range(n):
                p = wts[base + a * n + b]
                z = 0.0
                for u in range(f):
                    z += dy[lo + a, u] * v[lo + b, u]
                    dv[lo + b, u] += p * dy[lo + a, u]
                da[b] = z
                dot += p * z
            for b in range(n):
                g = wts[base + a * n + b] * (da[b] - dot) * scale
                for u in range(dk):
                    dq[lo + a, u] += g * k[lo + b, u]
                    dkk[lo + b, u] += g * q[lo + a, u]
    return dq, dkk, dv


def _segment_attention_fwd_np(q, k, v, seg, woff, scale):
    y = np.zeros((q.shape[0], v.shape[1]))
    wts = np.empty(int(woff[-1]))
    for s in range(len(seg) - 1):
        lo, hi = seg[s], seg[s + 1]
        z = (q[lo:hi] @ k[lo:hi].T) * scale
        e = np.exp(z - z.max(axis=1, keepdims=True))
        p = e / e.sum(axis=1, keepdims=True)
        wts[woff[s]:woff[s + 1]] = p.ravel()
        y[lo:hi] = p @ v[lo:hi]
    return y, wts


def _segment_attention_bwd_np(dy, q, k, v, wts, seg, woff, scale):
    dq = np.zeros_like(q)
    dk = np.zeros_like(k)
    dv = np.zeros_like(v)
    for s in range(len(seg) - 1):
        lo, hi = seg[s], seg[s + 1]
        n = hi - lo
        p = wts[woff[s]:woff[s + 1]].reshape(n, n)
        dv[lo:hi] = p.T @ dy[lo:hi]
        dp = dy[lo:hi] @ v[lo:hi].T
        dz = p * (dp - (dp * p).sum(axis=1, keepdims=True)) * scale
        dq[lo:hi] = dz @ k[lo:hi]
        dk[lo:hi] = dz.T @ q[lo:hi]
    return dq, dk, dv


def segment_attention_fwd(q, k, v, seg, scale, use_numba=None):
    use_numba = _accel.USE_NUMBA if use_numba is None else use_numba
    woff = weight_offsets(seg)
    fn = _segment_attention_fwd_nb if use_numba else _segment_attention_fwd_np
    y, wts = fn(q, k, v, seg, woff, scale)
    return y, wts, woff


def segment_attention_bwd(dy, q, k, v, wts, seg, woff, scale, use_numba=None):
    use_numba = _accel.USE_NUMBA if use_numba is None else use_numba
    fn = _segment_attention_bwd_nb if use_numba else _segment_attention_bwd_np
    return fn(dy, q, k, v, wts, seg, woff, scale)

"""Slow scalar-loop reference implementations.

Nothing here calls into the vectorized kernels in :mod:`hit.tensor`; each
function recomputes its result from first principles in float64 so it can
serve as an independent check.
"""
from __future__ import annotations

import math

import numpy as np


def matmul_loop(a, b):
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            s = 0.0
            for t in range(k):
                s += float(a[i, t]) * float(b[t, j])
            out[i, j] = s
    return out


def conv2d_loop(x, w, b=None, stride=1, pad=0):
    h, wd, cin = x.shape
    kh, kw, _, cout = w.shape
    xp = np.zeros((h + 2 * pad, wd + 2 * pad, cin))
    xp[pad : pad + h, pad : pad + wd] = x
    ho = (xp.shape[0] - kh) // stride + 1
    wo = (xp.shape[1] - kw) // stride + 1
    out = np.zeros((ho, wo, cout))
    for i in range(ho):
        for j in range(wo):
            patch = xp[i * stride : i * stride + kh, j * stride : j * stride + kw]
            for o in range(cout):
                out[i, j, o] = float(np.sum(patch * w[:, :, :, o])) + (0.0 if b is None else float(b[o]))
    return out


def transpose_conv_zero_insert(x, w, b=None, stride=2):
    """Transposed conv as zero insertion, full padding and a flipped-kernel convolution."""
    h, wd, cin = x.shape
    kh, kw, _, cout = w.shape
    up = np.zeros(((h - 1) * stride + 1, (wd - 1) * stride + 1, cin))
    up[::stride, ::stride] = x
    padded = np.zeros((up.shape[0] + 2 * (kh - 1), up.shape[1] + 2 * (kw - 1), cin))
    padded[kh - 1 : kh - 1 + up.shape[0], kw - 1 : kw - 1 + up.shape[1]] = up
    return conv2d_loop(padded, w[::-1, ::-1], b)


def softmax_list(row):
    m = max(row)
    e = [math.exp(v - m) for v in row]
    s = sum(e)
    return [v / s for v in e]


def hardswish_scalar(v):
    return v * min(max(v + 3.0, 0.0), 6.0) / 6.0


def attention_loop(x_q, x_kv, wq, bq, wk, bk, wv, bv, wo, bo, heads, key_dim, bias=None):
    """Per-head, per-query scalar attention with hardswish on each head output.

    ``bias`` is ``(heads, Tq, Tk)`` or None.
    """
    q = x_q.astype(np.float64) @ wq + bq
    k = x_kv.astype(np.float64) @ wk + bk
    v = x_kv.astype(np.float64) @ wv + bv
    tq, tk = q.shape[0], k.shape[0]
    dv = v.shape[1] // heads
    concat = np.zeros((tq, heads * dv))
    for h in range(heads):
        for i in range(tq):
            logits = []
            for j in range(tk):
                s = 0.0
                for d in range(key_dim):
                    s += q[i, h * key_dim + d] * k[j, h * key_dim + d]
                s /= math.sqrt(key_dim)
                if bias is not None:
                    s += float(bias[h, i, j])
                logits.append(s)
            p = softmax_list(logits)
            for d in range(dv):
                acc = sum(p[j] * v[j, h * dv + d] for j in range(tk))
                concat[i, h * dv + d] = hardswish_scalar(acc)
    return concat @ wo + bo


def grid_coords(w, h, ox=0, oy=0, step=1):
    return [(x + ox, y + oy) for y in range(0, h, step) for x in range(0, w, step)]


def central_difference(f, x, h=1e-4):
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g

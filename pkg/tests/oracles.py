"""Independent reference implementations used as test oracles.

Everything here is deliberately naive (explicit Python loops, math.erf,
direct exp/sum) and shares no code with the implementations it checks.
"""

from __future__ import annotations

import math

import numpy as np


def conv3d_loops(x: np.ndarray, w: np.ndarray, b: np.ndarray,
                 stride: tuple[int, int, int],
                 padding: tuple[int, int, int]) -> np.ndarray:
    """Six nested output loops with an explicit inner accumulation."""
    bs, c_in, t, h, wd = x.shape
    c_out, _, kt, kh, kw = w.shape
    st, sh, sw = stride
    pt, ph, pw = padding
    xp = np.zeros((bs, c_in, t + 2 * pt, h + 2 * ph, wd + 2 * pw), dtype=np.float64)
    xp[:, :, pt:pt + t, ph:ph + h, pw:pw + wd] = x
    t_o = (t + 2 * pt - kt) // st + 1
    h_o = (h + 2 * ph - kh) // sh + 1
    w_o = (wd + 2 * pw - kw) // sw + 1
    out = np.zeros((bs, c_out, t_o, h_o, w_o), dtype=np.float64)
    for n in range(bs):
        for co in range(c_out):
            for ot in range(t_o):
                for oh in range(h_o):
                    for ow in range(w_o):
                        acc = 0.0
                        for ci in range(c_in):
                            for i in range(kt):
                                for j in range(kh):
                                    for k in range(kw):
                                        acc += (xp[n, ci, ot * st + i,
                                                   oh * sh + j, ow * sw + k]
                                                * w[co, ci, i, j, k])
                        out[n, co, ot, oh, ow] = acc + b[co]
    return out


def linear_loops(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Nested-loop matmul on the trailing axis."""
    lead = x.shape[:-1]
    x2 = x.reshape(-1, x.shape[-1])
    d_out, d_in = w.shape
    out = np.zeros((x2.shape[0], d_out), dtype=np.float64)
    for r in range(x2.shape[0]):
        for o in range(d_out):
            acc = 0.0
            for i in range(d_in):
                acc += x2[r, i] * w[o, i]
            out[r, o] = acc + b[o]
    return out.reshape(*lead, d_out)


def softmax_direct(row: np.ndarray) -> np.ndarray:
    """Plain exp/sum (no max subtraction); only safe for moderate inputs."""
    e = np.exp(np.asarray(row, dtype=np.float64))
    return e / e.sum(axis=-1, keepdims=True)


def attention_loops(q: np.ndarray, k: np.ndarray, v: np.ndarray,
                    heads: int) -> np.ndarray:
    """Brute-force multi-head attention on ALREADY-PROJECTED q/k/v.

    Double loop over queries and keys per head; softmax via direct exp/sum.
    """
    b, nq, d = q.shape
    nk = k.shape[1]
    dk = d // heads
    out = np.zeros((b, nq, d), dtype=np.float64)
    for n in range(b):
        for hd in range(heads):
            sl = slice(hd * dk, (hd + 1) * dk)
            for iq in range(nq):
                logits = np.zeros(nk, dtype=np.float64)
                for ik in range(nk):
                    logits[ik] = float(q[n, iq, sl] @ k[n, ik, sl]) / math.sqrt(dk)
                weights = softmax_direct(logits)
                acc = np.zeros(dk, dtype=np.float64)
                for ik in range(nk):
                    acc += weights[ik] * v[n, ik, sl]
                out[n, iq, sl] = acc
    return out


def gelu_erf(x: float) -> float:
    """x * Phi(x) via math.erf, elementwise scalar."""
    return x * 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def cross_entropy_lse(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean NLL via an explicit log-sum-exp per row."""
    total = 0.0
    for row, y in zip(np.asarray(logits, dtype=np.float64), labels):
        m = row.max()
        lse = m + math.log(np.exp(row - m).sum())
        total += lse - row[int(y)]
    return total / len(labels)


def mean_pool_loops(x: np.ndarray, spatial_only: bool) -> np.ndarray:
    """Explicit summation oracle for the two average poolings."""
    b, c, t, h, w = x.shape
    if spatial_only:
        out = np.zeros((b, c, t), dtype=np.float64)
        for n in range(b):
            for ci in range(c):
                for ti in range(t):
                    acc = 0.0
                    for i in range(h):
                        for j in range(w):
                            acc += x[n, ci, ti, i, j]
                    out[n, ci, ti] = acc / (h * w)
        return out
    out = np.zeros((b, c), dtype=np.float64)
    for n in range(b):
        for ci in range(c):
            acc = 0.0
            for ti in range(t):
                for i in range(h):
                    for j in range(w):
                        acc += x[n, ci, ti, i, j]
            out[n, ci] = acc / (t * h * w)
    return out

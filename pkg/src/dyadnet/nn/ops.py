"""Differentiable operations over Tensor.

This is the complete op set the architecture needs: 3D convolution, the two
average poolings, affine maps, layer norm, GELU/ReLU, softmax, multi-head
attention, cross-entropy, plus the shape/stack plumbing to wire them. Each op
validates its contract, computes with numpy kernels, and registers a backward
closure on the output.

Convolution runs as patch-extraction + GEMM; its backward scatters gradients
back with one strided add per kernel offset. Attention is composed from
linear/reshape/matmul/softmax so its gradient falls out of the tape.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf as _erf

from ..errors import ConfigurationError, ContractViolation
from .tensor import Tensor, as_tensor

_INV_SQRT2 = 0.7071067811865476
_INV_SQRT_2PI = 0.3989422804014327

# ReLU kink bookkeeping for the gradient checker: when tracking is on, relu
# accumulates how many inputs were positive. A finite-difference probe whose
# two evaluations disagree on this count straddled a kink and must redraw
# its direction.
_relu_kink_tracking = False
_relu_pos_count = 0


def track_relu_kinks(enabled: bool) -> None:
    global _relu_kink_tracking, _relu_pos_count
    _relu_kink_tracking = bool(enabled)
    _relu_pos_count = 0


def relu_sign_signature() -> int:
    return _relu_pos_count


def _triple(v) -> tuple[int, int, int]:
    if isinstance(v, int):
        return (v, v, v)
    t = tuple(int(x) for x in v)
    if len(t) != 3:
        raise ContractViolation(f"expected int or triple, got {v!r}")
    return t


def _reduce_grad_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum gradient over axes that were broadcast up from `shape`."""
    if g.shape == shape:
        return g
    ndiff = g.ndim - len(shape)
    if ndiff:
        g = g.sum(axis=tuple(range(ndiff)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _same_dtype(*ts: Tensor) -> np.dtype:
    dt = ts[0].data.dtype
    for t in ts[1:]:
        if t.data.dtype != dt:
            raise ContractViolation(
                f"mixed dtypes {dt} and {t.data.dtype}; build the whole model in one dtype"
            )
    return dt




def _needs(*ts: Tensor) -> bool:
    return any(t.requires_grad for t in ts)


# ---------------------------------------------------------------------------
# elementwise / shape plumbing
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise addition; b may broadcast against a with leading/size-1 axes."""
    a, b = as_tensor(a), as_tensor(b)
    _same_dtype(a, b)
    out = Tensor(a.data + b.data, requires_grad=_needs(a, b), parents=(a, b), op="add")

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate_grad(_reduce_grad_to(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_reduce_grad_to(g, b.shape))

    out._backward = backward if out._parents else None
    return out


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    out = Tensor(a.data * np.asarray(s, dtype=a.data.dtype),
                 requires_grad=_needs(a), parents=(a,), op="scale")

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate_grad(g * np.asarray(s, dtype=g.dtype))

    out._backward = backward if out._parents else None
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (Hadamard) product with the same broadcasting rules as add."""
    a, b = as_tensor(a), as_tensor(b)
    _same_dtype(a, b)
    out = Tensor(a.data * b.data, requires_grad=_needs(a, b), parents=(a, b), op="mul")

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate_grad(_reduce_grad_to(g * b.data, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_reduce_grad_to(g * a.data, b.shape))

    out._backward = backward if out._parents else None
    return out


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = Tensor(a.data.reshape(shape), requires_grad=_needs(a), parents=(a,), op="reshape")

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate_grad(g.reshape(a.shape))

    out._backward = backward if out._parents else None
    return out


def transpose(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    out = Tensor(np.ascontiguousarray(a.data.transpose(axes)),
                 requires_grad=_needs(a), parents=(a,), op="transpose")
    inv = np.argsort(axes)

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate_grad(g.transpose(inv))

    out._backward = backward if out._parents else None
    return out


def concat(tensors: list[Tensor], axis: int) -> Tensor:
    _same_dtype(*tensors)
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis),
                 requires_grad=_needs(*tensors), parents=tuple(tensors), op="concat")
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g: np.ndarray) -> None:
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if not t.requires_grad:
                continue
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            t.accumulate_grad(g[tuple(idx)])

    out._backward = backward if out._parents else None
    return out


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice [start, start+length) along one axis."""
    if start < 0 or start + length > a.shape[axis]:
        raise ContractViolation(
            f"narrow [{start}:{start + length}) out of range for axis {axis} of extent {a.shape[axis]}"
        )
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(start, start + length)
    out = Tensor(np.ascontiguousarray(a.data[tuple(idx)]),
                 requires_grad=_needs(a), parents=(a,), op="narrow")

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[tuple(idx)] = g
            a.accumulate_grad(full)

    out._backward = backward if out._parents else None
    return out


def tile_batch(a: Tensor, n: int) -> Tensor:
    """Repeat a leading singleton batch axis n times (clf-token broadcast)."""
    if a.shape[0] != 1:
        raise ContractViolation(f"tile_batch expects leading extent 1, got {a.shape[0]}")
    out = Tensor(np.repeat(a.data, n, axis=0), requires_grad=_needs(a),
                 parents=(a,), op="tile_batch")

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate_grad(g.sum(axis=0, keepdims=True))

    out._backward = backward if out._parents else None
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product on the two trailing axes; leading axes must match."""
    _same_dtype(a, b)
    if a.shape[-1] != b.shape[-2]:
        raise ContractViolation(
            f"matmul inner extents differ: {a.shape[-1]} vs {b.shape[-2]}"
        )
    if a.shape[:-2] != b.shape[:-2]:
        raise ContractViolation(
            f"matmul leading extents differ: {a.shape[:-2]} vs {b.shape[:-2]}"
        )
    out = Tensor(a.data @ b.data, requires_grad=_needs(a, b), parents=(a, b), op="matmul")

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate_grad(g @ b.data.swapaxes(-1, -2))
        if b.requires_grad:
            b.accumulate_grad(a.data.swapaxes(-1, -2) @ g)

    out._backward = backward if out._parents else None
    return out


# ---------------------------------------------------------------------------
# activations, normalisation, softmax
# ---------------------------------------------------------------------------

def relu(a: Tensor) -> Tensor:
    global _relu_pos_count
    mask = a.data > 0
    if _relu_kink_tracking:
        _relu_pos_count += int(mask.sum())
    out = Tensor(np.where(mask, a.data, 0.0).astype(a.data.dtype),
                 requires_grad=_needs(a), parents=(a,), op="relu")

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate_grad(np.where(mask, g, 0.0).astype(g.dtype))

    out._backward = backward if out._parents else None
    return out


def gelu(a: Tensor) -> Tensor:
    """Exact Gaussian-CDF GELU: x * Phi(x), not the tanh approximation."""
    x = a.data
    phi_cdf = 0.5 * (1.0 + _erf(x * _INV_SQRT2))
    out = Tensor((x * phi_cdf).astype(x.dtype), requires_grad=_needs(a),
                 parents=(a,), op="gelu")

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            pdf = np.exp(-0.5 * x * x) * _INV_SQRT_2PI
            a.accumulate_grad((g * (phi_cdf + x * pdf)).astype(g.dtype))

    out._backward = backward if out._parents else None
    return out


def softmax(a: Tensor) -> Tensor:
    """Row softmax over the trailing axis, max-subtracted for stability."""
    if a.shape[-1] < 1:
        raise ContractViolation("softmax needs a non-empty trailing axis")
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(y.astype(a.data.dtype), requires_grad=_needs(a),
                 parents=(a,), op="softmax")

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            dot = (g * y).sum(axis=-1, keepdims=True)
            a.accumulate_grad((y * (g - dot)).astype(g.dtype))

    out._backward = backward if out._parents else None
    return out


def layer_norm(a: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise the trailing axis to zero mean / unit variance, then scale-shift."""
    d = a.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ContractViolation(
            f"layer_norm gamma/beta must have shape ({d},), got {gamma.shape}/{beta.shape}"
        )
    _same_dtype(a, gamma, beta)
    mu = a.data.mean(axis=-1, keepdims=True)
    xc = a.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = Tensor((xhat * gamma.data + beta.data).astype(a.data.dtype),
                 requires_grad=_needs(a, gamma, beta),
                 parents=(a, gamma, beta), op="layer_norm")

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            dxhat = g * gamma.data
            m1 = dxhat.mean(axis=-1, keepdims=True)
            m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
            a.accumulate_grad((inv * (dxhat - m1 - xhat * m2)).astype(g.dtype))
        red = tuple(range(g.ndim - 1))
        if gamma.requires_grad:
            gamma.accumulate_grad((g * xhat).sum(axis=red))
        if beta.requires_grad:
            beta.accumulate_grad(g.sum(axis=red))

    out._backward = backward if out._parents else None
    return out


# ---------------------------------------------------------------------------
# affine / convolution / pooling
# ---------------------------------------------------------------------------

def linear(a: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map on the trailing axis: y = a @ weight^T + bias."""
    d_out, d_in = weight.shape
    if a.shape[-1] != d_in:
        raise ContractViolation(
            f"linear input trailing extent {a.shape[-1]} != weight d_in {d_in}"
        )
    if bias is not None and bias.shape != (d_out,):
        raise ContractViolation(f"linear bias shape {bias.shape} != ({d_out},)")
    parents = (a, weight) if bias is None else (a, weight, bias)
    _same_dtype(*parents)
    lead = a.shape[:-1]
    a2 = a.data.reshape(-1, d_in)
    y = a2 @ weight.data.T
    if bias is not None:
        y += bias.data
    out = Tensor(y.reshape(*lead, d_out), requires_grad=_needs(*parents),
                 parents=parents, op="linear")

    def backward(g: np.ndarray) -> None:
        g2 = g.reshape(-1, d_out)
        if a.requires_grad:
            a.accumulate_grad((g2 @ weight.data).reshape(a.shape))
        if weight.requires_grad:
            weight.accumulate_grad(g2.T @ a2)
        if bias is not None and bias.requires_grad:
            bias.accumulate_grad(g2.sum(axis=0))

    out._backward = backward if out._parents else None
    return out


def conv3d(a: Tensor, weight: Tensor, bias: Tensor | None,
           stride=1, padding=0) -> Tensor:
    """3D cross-correlation plus bias over [b, c, t, h, w] input."""
    st = _triple(stride)
    pd = _triple(padding)
    if a.ndim != 5:
        raise ContractViolation(f"conv3d input must be rank 5, got shape {a.shape}")
    if weight.ndim != 5:
        raise ContractViolation(f"conv3d weight must be rank 5, got shape {weight.shape}")
    b_, c, t, h, w = a.shape
    c_out, c_in, kt, kh, kw = weight.shape
    if c != c_in:
        raise ContractViolation(
            f"conv3d channel mismatch: input has {c} channels, weight expects {c_in}"
        )
    if bias is not None and bias.shape != (c_out,):
        raise ContractViolation(f"conv3d bias shape {bias.shape} != ({c_out},)")
    outs = []
    for name, n, k, s, p in (("t", t, kt, st[0], pd[0]),
                             ("h", h, kh, st[1], pd[1]),
                             ("w", w, kw, st[2], pd[2])):
        o = (n + 2 * p - k) // s + 1
        if o < 1:
            raise ContractViolation(
                f"conv3d output extent along {name} would be {o} "
                f"(in={n}, kernel={k}, stride={s}, pad={p})"
            )
        outs.append(o)
    t_o, h_o, w_o = outs
    parents = (a, weight) if bias is None else (a, weight, bias)
    _same_dtype(*parents)

    xp = np.pad(a.data, ((0, 0), (0, 0), (pd[0], pd[0]), (pd[1], pd[1]), (pd[2], pd[2])))
    win = sliding_window_view(xp, (kt, kh, kw), axis=(2, 3, 4))
    win = win[:, :, ::st[0], ::st[1], ::st[2]]          # [b, c, t', h', w', kt, kh, kw]
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 4, 1, 5, 6, 7))
    cols = cols.reshape(b_ * t_o * h_o * w_o, c_in * kt * kh * kw)
    wmat = weight.data.reshape(c_out, -1)
    y = cols @ wmat.T
    if bias is not None:
        y += bias.data
    y = y.reshape(b_, t_o, h_o, w_o, c_out).transpose(0, 4, 1, 2, 3)
    out = Tensor(np.ascontiguousarray(y), requires_grad=_needs(*parents),
                 parents=parents, op="conv3d")

    def backward(g: np.ndarray) -> None:
        g2 = np.ascontiguousarray(g.transpose(0, 2, 3, 4, 1)).reshape(-1, c_out)
        if weight.requires_grad:
            weight.accumulate_grad((g2.T @ cols).reshape(weight.shape))
        if bias is not None and bias.requires_grad:
            bias.accumulate_grad(g2.sum(axis=0))
        if not a.requires_grad:
            return
        gcols = g2 @ wmat
        gcols = gcols.reshape(b_, t_o, h_o, w_o, c_in, kt, kh, kw)
        gcols = gcols.transpose(0, 4, 5, 6, 7, 1, 2, 3)  # [b, c, kt, kh, kw, t', h', w']
        gx = np.zeros_like(xp)
        for i in range(kt):
            for j in range(kh):
                for k in range(kw):
                    gx[:, :,
                       i:i + st[0] * t_o:st[0],
                       j:j + st[1] * h_o:st[1],
                       k:k + st[2] * w_o:st[2]] += gcols[:, :, i, j, k]
        a.accumulate_grad(gx[:, :, pd[0]:pd[0] + t, pd[1]:pd[1] + h, pd[2]:pd[2] + w])

    out._backward = backward if out._parents else None
    return out


def avg_pool3d_global(a: Tensor) -> Tensor:
    """Mean over all t*h*w positions per (batch, channel): [b,c,t,h,w] -> [b,c]."""
    if a.ndim != 5:
        raise ContractViolation(f"avg_pool3d_global input must be rank 5, got {a.shape}")
    b_, c, t, h, w = a.shape
    if t < 1 or h < 1 or w < 1:
        raise ContractViolation(f"avg_pool3d_global needs t,h,w >= 1, got {(t, h, w)}")
    n = t * h * w
    out = Tensor(a.data.mean(axis=(2, 3, 4)), requires_grad=_needs(a),
                 parents=(a,), op="avg_pool3d_global")

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            gi = np.broadcast_to((g / n)[:, :, None, None, None], a.shape)
            a.accumulate_grad(gi.astype(g.dtype))

    out._backward = backward if out._parents else None
    return out


def avg_pool2d_spatial(a: Tensor) -> Tensor:
    """Mean over h*w per (batch, channel, frame): [b,c,t,h,w] -> [b,c,t]."""
    if a.ndim != 5:
        raise ContractViolation(f"avg_pool2d_spatial input must be rank 5, got {a.shape}")
    b_, c, t, h, w = a.shape
    if h < 1 or w < 1:
        raise ContractViolation(f"avg_pool2d_spatial needs h,w >= 1, got {(h, w)}")
    n = h * w
    out = Tensor(a.data.mean(axis=(3, 4)), requires_grad=_needs(a),
                 parents=(a,), op="avg_pool2d_spatial")

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            gi = np.broadcast_to((g / n)[:, :, :, None, None], a.shape)
            a.accumulate_grad(gi.astype(g.dtype))

    out._backward = backward if out._parents else None
    return out


def sum_all(a: Tensor) -> Tensor:
    """Reduce every element to one scalar (loss plumbing and gradcheck)."""
    out = Tensor(np.asarray(a.data.sum(), dtype=a.data.dtype),
                 requires_grad=_needs(a), parents=(a,), op="sum_all")

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate_grad(np.broadcast_to(g, a.shape).astype(g.dtype))

    out._backward = backward if out._parents else None
    return out


# ---------------------------------------------------------------------------
# attention and loss
# ---------------------------------------------------------------------------

def multi_head_attention(q: Tensor, k: Tensor, v: Tensor, heads: int,
                         wq: Tensor, bq: Tensor, wk: Tensor, bk: Tensor,
                         wv: Tensor, bv: Tensor, wo: Tensor, bo: Tensor) -> Tensor:
    """Projected multi-head scaled dot-product attention.

    q: [b, nq, d], k/v: [b, nk, d]. Per head, softmax(QK^T / sqrt(d_k)) V on the
    projected subspaces; heads are concatenated and output-projected. k and v
    may be the same tensor.
    """
    d = q.shape[-1]
    if d % heads != 0:
        raise ConfigurationError(f"model width {d} not divisible by {heads} heads")
    if k.shape[-1] != d or v.shape[-1] != d:
        raise ContractViolation(
            f"attention width mismatch: q={d}, k={k.shape[-1]}, v={v.shape[-1]}"
        )
    if k.shape[1] != v.shape[1]:
        raise ContractViolation(
            f"key/value token counts differ: {k.shape[1]} vs {v.shape[1]}"
        )
    b, nq, _ = q.shape
    nk = k.shape[1]
    dk = d // heads

    def split(x: Tensor, n: int) -> Tensor:
        return transpose(reshape(x, (b, n, heads, dk)), (0, 2, 1, 3))

    qh = split(linear(q, wq, bq), nq)                       # [b, hd, nq, dk]
    kh = split(linear(k, wk, bk), nk)
    vh = split(linear(v, wv, bv), nk)
    scores = scale(matmul(qh, transpose(kh, (0, 1, 3, 2))), 1.0 / np.sqrt(dk))
    attn = softmax(scores)                                  # [b, hd, nq, nk]
    ctx = matmul(attn, vh)                                  # [b, hd, nq, dk]
    ctx = reshape(transpose(ctx, (0, 2, 1, 3)), (b, nq, d))
    return linear(ctx, wo, bo)


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-softmax at the label index; labels are int per row."""
    if logits.ndim != 2:
        raise ContractViolation(f"cross_entropy logits must be [b, k], got {logits.shape}")
    b, k = logits.shape
    labels = np.asarray(labels)
    if labels.shape != (b,):
        raise ContractViolation(f"labels shape {labels.shape} != ({b},)")
    if labels.min() < 0 or labels.max() >= k:
        bad = labels[(labels < 0) | (labels >= k)][0]
        raise ContractViolation(f"label {bad} outside [0, {k})")
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1))
    nll = lse - z[np.arange(b), labels]
    out = Tensor(np.asarray(nll.mean(), dtype=logits.data.dtype),
                 requires_grad=_needs(logits), parents=(logits,), op="cross_entropy")

    def backward(g: np.ndarray) -> None:
        if logits.requires_grad:
            p = np.exp(z) / np.exp(z).sum(axis=-1, keepdims=True)
            p[np.arange(b), labels] -= 1.0
            logits.accumulate_grad((p * (g / b)).astype(g.dtype))

    out._backward = backward if out._parents else None
    return out

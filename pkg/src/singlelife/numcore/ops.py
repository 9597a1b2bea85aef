"""Forward primitives with hand-written gradient rules.

Broadcasting is intentionally restricted to what the model needs and what can
be audited by eye: elementwise ops accept equal shapes or a trailing-dims
operand broadcast over leading batch dims; matmul accepts stacked leading
dims against a plain 2-D weight or an equally-stacked operand.

GELU uses the tanh approximation
    0.5 * x * (1 + tanh(sqrt(2/pi) * (x + 0.044715 * x^3))),
the standard transformer constant.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError, ContractError, DimensionError
from .tensor import Tensor, make_node

_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


def constant(data, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=False, dtype=dtype)


def leaf(data, name=None, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name, dtype=dtype)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `g` down to `shape` (inverse of numpy leading-dim broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _binary_shapes_ok(a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"shapes {a.shape} and {b.shape} do not broadcast")


def add(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes_ok(a, b)
    out = a.data + b.data

    def bw(g):
        if a._needs_grad:
            a.accumulate_grad(_unbroadcast(g, a.shape))
        if b._needs_grad:
            b.accumulate_grad(_unbroadcast(g, b.shape))

    return make_node(out, (a, b), bw, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes_ok(a, b)
    out = a.data - b.data

    def bw(g):
        if a._needs_grad:
            a.accumulate_grad(_unbroadcast(g, a.shape))
        if b._needs_grad:
            b.accumulate_grad(_unbroadcast(-g, b.shape))

    return make_node(out, (a, b), bw, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes_ok(a, b)
    out = a.data * b.data

    def bw(g):
        if a._needs_grad:
            a.accumulate_grad(_unbroadcast(g * b.data, a.shape))
        if b._needs_grad:
            b.accumulate_grad(_unbroadcast(g * a.data, b.shape))

    return make_node(out, (a, b), bw, "mul")


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    out = a.data * c

    def bw(g):
        if a._needs_grad:
            a.accumulate_grad(g * c)

    return make_node(out, (a,), bw, "scale")


def square(a: Tensor) -> Tensor:
    out = a.data * a.data

    def bw(g):
        if a._needs_grad:
            a.accumulate_grad(g * (2.0 * a.data))

    return make_node(out, (a,), bw, "square")


def absolute(a: Tensor) -> Tensor:
    out = np.abs(a.data)

    def bw(g):
        if a._needs_grad:
            a.accumulate_grad(g * np.sign(a.data))

    return make_node(out, (a,), bw, "absolute")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError("matmul operands must be at least 2-D")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul inner dims disagree: {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def bw(g):
        if a._needs_grad:
            ga = g @ np.swapaxes(b.data, -1, -2)
            a.accumulate_grad(_unbroadcast(ga, a.shape))
        if b._needs_grad:
            gb = np.swapaxes(a.data, -1, -2) @ g
            b.accumulate_grad(_unbroadcast(gb, b.shape))

    return make_node(out, (a, b), bw, "matmul")


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """y = x @ w + b, with b broadcast over leading dims."""
    if w.ndim != 2 or b.ndim != 1:
        raise DimensionError("affine expects 2-D weight and 1-D bias")
    if x.shape[-1] != w.shape[0] or w.shape[1] != b.shape[0]:
        raise DimensionError(f"affine shapes disagree: x{x.shape} w{w.shape} b{b.shape}")
    out = x.data @ w.data + b.data

    def bw(g):
        if x._needs_grad:
            x.accumulate_grad(g @ w.data.T)
        if w._needs_grad:
            xg = x.data.reshape(-1, x.shape[-1])
            w.accumulate_grad(xg.T @ g.reshape(-1, g.shape[-1]))
        if b._needs_grad:
            b.accumulate_grad(g.reshape(-1, g.shape[-1]).sum(axis=0))

    return make_node(out, (x, w, b), bw, "affine")


def reshape(a: Tensor, shape) -> Tensor:
    out = a.data.reshape(shape)

    def bw(g):
        if a._needs_grad:
            a.accumulate_grad(g.reshape(a.shape))

    return make_node(out, (a,), bw, "reshape")


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    out = a.data.transpose(axes)

    def bw(g):
        if a._needs_grad:
            a.accumulate_grad(g.transpose(inv))

    return make_node(out, (a,), bw, "transpose")


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    if a.shape == () or a.shape[axis] < 1:
        raise DimensionError("softmax needs a non-empty axis")
    z = a.data - a.data.max(axis=axis, keepdims=True)
    out = np.exp(z, out=z)
    out /= out.sum(axis=axis, keepdims=True)

    def bw(g):
        if a._needs_grad:
            tmp = g * out
            dot = tmp.sum(axis=axis, keepdims=True)
            tmp -= dot * out
            a.accumulate_grad(tmp)

    return make_node(out, (a,), bw, "softmax")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalize the last dim to zero mean / unit variance, then scale+shift."""
    if eps <= 0:
        raise ContractError("layer_norm eps must be > 0")
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise DimensionError("layer_norm gamma/beta must match last dim")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def bw(g):
        if gamma._needs_grad:
            gamma.accumulate_grad((g * xhat).reshape(-1, d).sum(axis=0))
        if beta._needs_grad:
            beta.accumulate_grad(g.reshape(-1, d).sum(axis=0))
        if x._needs_grad:
            gx = g * gamma.data
            term = gx - gx.mean(axis=-1, keepdims=True)
            term -= xhat * (gx * xhat).mean(axis=-1, keepdims=True)
            term *= inv
            x.accumulate_grad(term)

    return make_node(out, (x, gamma, beta), bw, "layer_norm")


_GELU_CHUNK = 65536  # elements per tile; keeps the temporaries cache-resident


def _gelu_forward(x: np.ndarray):
    """Tanh-approximation GELU; returns (value, tanh term, x^2) for the backward.

    Computed tile by tile: the op is memory-bound, so keeping every
    intermediate pass inside the cache beats whole-array numpy expressions.
    (Also avoids np.power, which is pathologically slow on negative float32.)
    """
    xc = x if x.flags.c_contiguous else np.ascontiguousarray(x)
    flat = xc.reshape(-1)
    out = np.empty_like(flat)
    t = np.empty_like(flat)
    x2 = np.empty_like(flat)
    for i in range(0, flat.size, _GELU_CHUNK):
        s = slice(i, min(i + _GELU_CHUNK, flat.size))
        xx = flat[s]
        np.multiply(xx, xx, out=x2[s])
        tt = t[s]
        np.multiply(x2[s], xx, out=tt)
        tt *= _GELU_A
        tt += xx
        tt *= _GELU_C
        np.tanh(tt, out=tt)
        oo = out[s]
        np.add(tt, 1.0, out=oo)
        oo *= xx
        oo *= 0.5
    return out.reshape(x.shape), t, x2  # t, x2 flat; only the backward reads them


def _gelu_grad(g, x, t, x2):
    gc = g if g.flags.c_contiguous else np.ascontiguousarray(g)
    gf = gc.reshape(-1)
    xf = (x if x.flags.c_contiguous else np.ascontiguousarray(x)).reshape(-1)
    d = np.empty_like(gf)
    tmp = np.empty(min(_GELU_CHUNK, gf.size), dtype=gf.dtype)
    for i in range(0, gf.size, _GELU_CHUNK):
        s = slice(i, min(i + _GELU_CHUNK, gf.size))
        dd, tt, w = d[s], t[s], tmp[: s.stop - s.start]
        np.multiply(x2[s], 3.0 * _GELU_A, out=dd)
        dd += 1.0
        dd *= _GELU_C * 0.5
        np.multiply(tt, tt, out=w)
        np.subtract(1.0, w, out=w)
        dd *= w
        dd *= xf[s]
        np.add(tt, 1.0, out=w)
        w *= 0.5
        dd += w
        dd *= gf[s]
    return d.reshape(g.shape)


def gelu(a: Tensor) -> Tensor:
    x = a.data
    out, t, x2 = _gelu_forward(x)

    def bw(g):
        if a._needs_grad:
            a.accumulate_grad(_gelu_grad(g, x, t, x2))

    return make_node(out, (a,), bw, "gelu")


def softplus(a: Tensor) -> Tensor:
    out = np.logaddexp(0.0, a.data)

    def bw(g):
        if a._needs_grad:
            a.accumulate_grad(g / (1.0 + np.exp(-a.data)))

    return make_node(out, (a,), bw, "softplus")


def gather_rows(a: Tensor, idx: np.ndarray) -> Tensor:
    """Select rows along axis -2. `idx` is [S] shared or [B, S] per batch."""
    idx = np.asarray(idx)
    if idx.ndim == 1:
        out = np.take(a.data, idx, axis=-2)
    elif idx.ndim == 2 and a.ndim == 3:
        out = np.take_along_axis(a.data, idx[:, :, None], axis=1)
    else:
        raise DimensionError(f"gather_rows: idx ndim {idx.ndim} vs tensor ndim {a.ndim}")

    def bw(g):
        if a._needs_grad:
            ga = np.zeros(a.shape, dtype=a.dtype)
            if idx.ndim == 1:
                gav = np.moveaxis(ga, -2, 0)
                np.add.at(gav, idx, np.moveaxis(g, -2, 0))
            else:
                bsz, n, d = a.shape
                flat = (np.arange(bsz)[:, None] * n + idx).ravel()
                np.add.at(ga.reshape(bsz * n, d), flat, g.reshape(-1, d))
            a.accumulate_grad(ga)

    return make_node(out, (a,), bw, "gather_rows")


def scatter_rows(base: Tensor, idx: np.ndarray, rows: Tensor) -> Tensor:
    """Copy of `base` with rows at `idx` (axis -2) replaced by `rows`."""
    idx = np.asarray(idx)
    out = np.array(base.data, copy=True)
    if idx.ndim == 1:
        out[..., idx, :] = rows.data
    elif idx.ndim == 2 and base.ndim == 3:
        np.put_along_axis(out, idx[:, :, None], rows.data, axis=1)
    else:
        raise DimensionError(f"scatter_rows: idx ndim {idx.ndim} vs tensor ndim {base.ndim}")

    def bw(g):
        if rows._needs_grad:
            if idx.ndim == 1:
                rows.accumulate_grad(np.take(g, idx, axis=-2).reshape(rows.shape))
            else:
                rows.accumulate_grad(np.take_along_axis(g, idx[:, :, None], axis=1))
        if base._needs_grad:
            gb = np.array(g, copy=True)
            if idx.ndim == 1:
                gb[..., idx, :] = 0.0
            else:
                np.put_along_axis(gb, idx[:, :, None], 0.0, axis=1)
            base.accumulate_grad(gb)

    return make_node(out, (base, rows), bw, "scatter_rows")


def sum_all(a: Tensor) -> Tensor:
    out = a.data.sum()

    def bw(g):
        if a._needs_grad:
            a.accumulate_grad(np.full(a.shape, float(g), dtype=a.dtype))

    return make_node(out, (a,), bw, "sum_all")


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    if n == 0:
        raise ContractError("mean of an empty tensor")
    out = a.data.mean()

    def bw(g):
        if a._needs_grad:
            a.accumulate_grad(np.full(a.shape, float(g) / n, dtype=a.dtype))

    return make_node(out, (a,), bw, "mean_all")


def mse(pred: Tensor, target: Tensor) -> Tensor:
    if pred.shape != target.shape:
        raise DimensionError(f"mse shapes disagree: {pred.shape} vs {target.shape}")
    return mean_all(square(sub(pred, target)))


def _split_heads(x: Tensor, heads: int) -> Tensor:
    *lead, n, d = x.shape
    dh = d // heads
    x = reshape(x, (*lead, n, heads, dh))
    axes = tuple(range(len(lead))) + (len(lead) + 1, len(lead), len(lead) + 2)
    return transpose(x, axes)  # [..., heads, n, dh]


def _merge_heads(x: Tensor) -> Tensor:
    *lead, h, n, dh = x.shape
    axes = tuple(range(len(lead))) + (len(lead) + 1, len(lead), len(lead) + 2)
    x = transpose(x, axes)
    return reshape(x, (*lead, n, h * dh))


def multi_head_attention(q_in: Tensor, kv_in: Tensor, params: dict, heads: int,
                         return_logits: bool = False):
    """Scaled dot-product attention: queries from `q_in`, keys/values from `kv_in`.

    `params` holds wq,bq,wk,bk,wv,bv,wo,bo. Returns (output, logits) where
    logits are the pre-softmax per-head scores q k^T / sqrt(d/heads), or None
    unless `return_logits` is set.
    """
    d = q_in.shape[-1]
    if d % heads != 0:
        raise ConfigError(f"model dim {d} not divisible by heads {heads}")
    q = _split_heads(affine(q_in, params["wq"], params["bq"]), heads)
    k = _split_heads(affine(kv_in, params["wk"], params["bk"]), heads)
    v = _split_heads(affine(kv_in, params["wv"], params["bv"]), heads)
    dh = d // heads
    logits = scale(matmul(q, transpose(k, _swap_last2_axes(k.ndim))), 1.0 / math.sqrt(dh))
    weights = softmax(logits, axis=-1)
    out = _merge_heads(matmul(weights, v))
    out = affine(out, params["wo"], params["bo"])
    return out, (logits if return_logits else None)


def _swap_last2_axes(ndim: int) -> tuple:
    axes = list(range(ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return tuple(axes)


def mlp_gelu(x: Tensor, w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor) -> Tensor:
    """Fused two-layer MLP with GELU: (gelu(x @ w1 + b1)) @ w2 + b2.

    One tape node instead of five; the hand-written backward avoids the large
    intermediate gradient buffers of the composed form (this is the hot path
    of every transformer block).
    """
    if x.shape[-1] != w1.shape[0] or w1.shape[1] != w2.shape[0]:
        raise DimensionError(f"mlp shapes disagree: x{x.shape} w1{w1.shape} w2{w2.shape}")
    xin = x.data
    pre = xin @ w1.data + b1.data
    act, t, x2 = _gelu_forward(pre)
    out = act @ w2.data + b2.data

    def bw(g):
        g2 = g.reshape(-1, g.shape[-1])
        act2 = act.reshape(-1, act.shape[-1])
        if w2._needs_grad:
            w2.accumulate_grad(act2.T @ g2)
        if b2._needs_grad:
            b2.accumulate_grad(g2.sum(axis=0))
        g_pre = _gelu_grad(g @ w2.data.T, pre, t, x2)
        gp2 = g_pre.reshape(-1, g_pre.shape[-1])
        xin2 = xin.reshape(-1, xin.shape[-1])
        if w1._needs_grad:
            w1.accumulate_grad(xin2.T @ gp2)
        if b1._needs_grad:
            b1.accumulate_grad(gp2.sum(axis=0))
        if x._needs_grad:
            x.accumulate_grad(g_pre @ w1.data.T)

    return make_node(out, (x, w1, b1, w2, b2), bw, "mlp_gelu")

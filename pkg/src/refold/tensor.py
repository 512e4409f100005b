"""Dense tensor engine with reverse-mode automatic differentiation.

Backed by numpy arrays. Every operation builds a computation graph node
holding a backward closure; calling ``backward()`` on a scalar result
topologically sorts the graph and accumulates gradients into the leaf
tensors that were created with ``requires_grad=True``.

Conventions:
  - single precision (float32) for training, double (float64) for
    gradient checks,
  - convolutions use symmetric zero "same" padding and odd kernels only,
    so strided outputs have exactly F/Sf x T/St extent,
  - every op checks its result for NaN/Inf and raises NumericError
    instead of propagating silently (toggle with `set_finite_checks`).

A computation graph is confined to one thread; distinct graphs may run
concurrently on read-only shared parameter data.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf

from .errors import ContractError, NumericError

_FINITE_CHECKS = True

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


def set_finite_checks(enabled):
    """Enable/disable NaN/Inf checking after every op. Returns old value."""
    global _FINITE_CHECKS
    old = _FINITE_CHECKS
    _FINITE_CHECKS = bool(enabled)
    return old


def _check_finite(arr, op_name):
    if _FINITE_CHECKS and not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values produced by op '{op_name}'")


class Tensor:
    """N-dimensional float array with optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        _check_finite(arr, "tensor")

    # -- constructors -------------------------------------------------

    @staticmethod
    def zeros(shape, dtype=np.float32, requires_grad=False):
        return Tensor(np.zeros(shape, dtype=dtype), requires_grad=requires_grad)

    @staticmethod
    def from_op(data, parents, backward, op_name):
        """Internal: wrap an op result, keeping the graph only if needed."""
        _check_finite(data, op_name)
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out.requires_grad = any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    # -- basic introspection ------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _raise_item(self)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    # -- autodiff driver ----------------------------------------------

    def backward(self, grad=None):
        """Reverse-mode pass from this tensor back to all leaves."""
        if grad is None:
            if self.data.size != 1:
                raise ContractError(
                    f"backward() without explicit gradient requires a scalar, got shape {self.data.shape}"
                )
            grad = np.ones_like(self.data)
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(grad)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(_as_tensor(other, self.dtype), -1.0))

    def __rsub__(self, other):
        return add(_as_tensor(other, self.dtype), mul(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_tensor(other, self.dtype)
        return mul(self, power(other, -1.0))

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, *axes):
        return transpose(self, axes if axes else None)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)


def _raise_item(t):
    raise ContractError(f"item() requires a single-element tensor, got shape {t.data.shape}")


def _as_tensor(x, dtype=np.float32):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# ---------------------------------------------------------------------
# elementwise / arithmetic primitives
# ---------------------------------------------------------------------


def add(a, b):
    a = _as_tensor(a)
    b = _as_tensor(b, a.dtype)
    out_data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return Tensor.from_op(out_data, (a, b), backward, "add")


def mul(a, b):
    a = _as_tensor(a)
    b = _as_tensor(b, a.dtype)
    out_data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return Tensor.from_op(out_data, (a, b), backward, "mul")


def power(a, exponent):
    a = _as_tensor(a)
    p = float(exponent)
    out_data = a.data**p

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * p * a.data ** (p - 1.0))

    return Tensor.from_op(out_data, (a,), backward, "power")


def texp(a):
    a = _as_tensor(a)
    out_data = np.exp(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * out_data)

    return Tensor.from_op(out_data, (a,), backward, "exp")


def tlog(a):
    a = _as_tensor(a)
    out_data = np.log(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g / a.data)

    return Tensor.from_op(out_data, (a,), backward, "log")


def tsqrt(a):
    a = _as_tensor(a)
    out_data = np.sqrt(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * 0.5 / out_data)

    return Tensor.from_op(out_data, (a,), backward, "sqrt")


def relu(a):
    a = _as_tensor(a)
    out_data = np.maximum(a.data, 0.0)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * (a.data > 0))

    return Tensor.from_op(out_data, (a,), backward, "relu")


def gelu(a):
    """Exact (erf-based) GELU."""
    a = _as_tensor(a)
    x = a.data
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    out_data = (x * cdf).astype(x.dtype)

    def backward(g):
        if a.requires_grad:
            pdf = np.exp(-0.5 * x * x) * _INV_SQRT2PI
            a._accumulate(g * (cdf + x * pdf).astype(x.dtype))

    return Tensor.from_op(out_data, (a,), backward, "gelu")


def tanh(a):
    a = _as_tensor(a)
    out_data = np.tanh(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * (1.0 - out_data * out_data))

    return Tensor.from_op(out_data, (a,), backward, "tanh")


def softplus(a):
    """log(1 + exp(x)), numerically stable."""
    a = _as_tensor(a)
    out_data = np.logaddexp(np.zeros((), dtype=a.dtype), a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g / (1.0 + np.exp(-a.data)))

    return Tensor.from_op(out_data, (a,), backward, "softplus")


def softmax(a, axis=-1):
    a = _as_tensor(a)
    if not -a.ndim <= axis < a.ndim:
        raise ContractError(f"softmax axis {axis} out of range for shape {a.shape}")
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        if a.requires_grad:
            dot = (g * out_data).sum(axis=axis, keepdims=True)
            a._accumulate(out_data * (g - dot))

    return Tensor.from_op(out_data, (a,), backward, "softmax")


# ---------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------


def _norm_axis(axis, ndim):
    if axis is None:
        return None
    if isinstance(axis, int):
        axis = (axis,)
    axis = tuple(ax % ndim if -ndim <= ax < ndim else _axis_err(ax, ndim) for ax in axis)
    return axis


def _axis_err(ax, ndim):
    raise ContractError(f"axis {ax} out of range for ndim {ndim}")


def tsum(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    axis = _norm_axis(axis, a.ndim)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if a.requires_grad:
            gg = g
            if not keepdims and axis is not None:
                gg = np.expand_dims(gg, axis)
            elif not keepdims and axis is None:
                gg = np.asarray(gg).reshape((1,) * a.ndim)
            a._accumulate(np.broadcast_to(gg, a.data.shape))

    return Tensor.from_op(np.asarray(out_data), (a,), backward, "sum")


def tmean(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    ax = _norm_axis(axis, a.ndim)
    if ax is None:
        n = a.data.size
    else:
        n = int(np.prod([a.data.shape[i] for i in ax]))
    if n == 0:
        raise ContractError("mean over zero-length reduction")
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def tstd(a, axis=None, keepdims=False, eps=0.0):
    """Population standard deviation along `axis` (composite op)."""
    m = tmean(a, axis=axis, keepdims=True)
    var = tmean(mul(add(a, mul(m, -1.0)), add(a, mul(m, -1.0))), axis=axis, keepdims=keepdims)
    if eps:
        var = add(var, eps)
    return tsqrt(var)


# ---------------------------------------------------------------------
# shape ops
# ---------------------------------------------------------------------


def reshape(a, shape):
    a = _as_tensor(a)
    try:
        out_data = a.data.reshape(shape)
    except ValueError as exc:
        raise ContractError(f"cannot reshape {a.data.shape} to {shape}") from exc

    def backward(g):
        if a.requires_grad:
            a._accumulate(g.reshape(a.data.shape))

    return Tensor.from_op(out_data, (a,), backward, "reshape")


def transpose(a, axes=None):
    a = _as_tensor(a)
    out_data = np.transpose(a.data, axes)
    if axes is None:
        inv = None
    else:
        inv = np.argsort(axes)

    def backward(g):
        if a.requires_grad:
            a._accumulate(np.transpose(g, inv))

    return Tensor.from_op(out_data, (a,), backward, "transpose")


def concat(tensors, axis=0):
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ContractError("concat of zero tensors")
    axis = axis % tensors[0].ndim
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t._accumulate(g[tuple(idx)])

    return Tensor.from_op(out_data, tuple(tensors), backward, "concat")


# ---------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------


def matmul(a, b):
    """Matrix product; batched over leading axes (which must match)."""
    a = _as_tensor(a)
    b = _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ContractError(f"matmul requires ndim >= 2, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ContractError(f"matmul inner dims mismatch: {a.shape} @ {b.shape}")
    out_data = np.matmul(a.data, b.data)

    def backward(g):
        if a.requires_grad:
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            a._accumulate(_unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            b._accumulate(_unbroadcast(gb, b.data.shape))

    return Tensor.from_op(out_data, (a, b), backward, "matmul")


def linear(x, w, b=None):
    """x @ w^T (+ b). x: [..., Din], w: [Dout, Din], b: [Dout]."""
    x = _as_tensor(x)
    w = _as_tensor(w)
    if x.shape[-1] != w.shape[-1]:
        raise ContractError(f"linear: input dim {x.shape[-1]} != weight dim {w.shape[-1]}")
    out = matmul(x, transpose(w))
    if b is not None:
        out = add(out, b)
    return out


# ---------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------


def layer_norm(x, gamma=None, beta=None, axis=-1, eps=1e-5):
    """Normalize to zero mean / unit variance along `axis`, then affine."""
    x = _as_tensor(x)
    m = tmean(x, axis=axis, keepdims=True)
    centered = add(x, mul(m, -1.0))
    var = tmean(mul(centered, centered), axis=axis, keepdims=True)
    inv = power(add(var, eps), -0.5)
    out = mul(centered, inv)
    if gamma is not None:
        out = mul(out, gamma)
    if beta is not None:
        out = add(out, beta)
    return out


def batch_norm_2d(x, gamma, beta, running_mean, running_var, train, momentum=0.1, eps=1e-5):
    """Batch norm over [B, C, F, T], statistics per channel.

    `running_mean`/`running_var` are plain float arrays mutated in place
    when `train` is True (exponential update with the given momentum);
    in eval mode they are used instead of batch statistics.
    """
    x = _as_tensor(x)
    if x.ndim != 4:
        raise ContractError(f"batch_norm_2d expects [B,C,F,T], got {x.shape}")
    c = x.shape[1]
    gshape = (1, c, 1, 1)
    if train:
        m = tmean(x, axis=(0, 2, 3), keepdims=True)
        centered = add(x, mul(m, -1.0))
        var = tmean(mul(centered, centered), axis=(0, 2, 3), keepdims=True)
        n = x.data.size // c
        # unbiased variance for the running buffer, biased for normalization
        unbiased = var.data.reshape(c) * (n / max(n - 1, 1))
        running_mean *= 1.0 - momentum
        running_mean += momentum * m.data.reshape(c)
        running_var *= 1.0 - momentum
        running_var += momentum * unbiased
        inv = power(add(var, eps), -0.5)
        out = mul(centered, inv)
    else:
        m = running_mean.reshape(gshape)
        inv = 1.0 / np.sqrt(running_var.reshape(gshape) + eps)
        out = mul(add(x, Tensor((-m).astype(x.dtype))), Tensor(inv.astype(x.dtype)))
    out = add(mul(out, reshape(gamma, gshape)), reshape(beta, gshape))
    return out


# ---------------------------------------------------------------------
# convolutions
# ---------------------------------------------------------------------


def conv2d(x, w, stride=(1, 1)):
    """2D convolution with symmetric zero "same" padding.

    x: [B, Cin, F, T], w: [Cout, Cin, Kf, Kt], stride (Sf, St).
    Output: [B, Cout, F/Sf, T/St]; F, T must be divisible by the strides.
    """
    x = _as_tensor(x)
    w = _as_tensor(w)
    if x.ndim != 4 or w.ndim != 4:
        raise ContractError(f"conv2d expects 4D input and weight, got {x.shape}, {w.shape}")
    bsz, cin, f, t = x.shape
    cout, wcin, kf, kt = w.shape
    if wcin != cin:
        raise ContractError(f"conv2d channel mismatch: input {x.shape} vs weight {w.shape}")
    if kf % 2 == 0 or kt % 2 == 0:
        raise ContractError(f"conv2d requires odd kernels, got ({kf},{kt})")
    sf, st = stride
    if f % sf or t % st:
        raise ContractError(f"conv2d spatial dims {f}x{t} not divisible by stride ({sf},{st})")
    pf, pt = kf // 2, kt // 2
    fo, to = f // sf, t // st

    xp = np.pad(x.data, ((0, 0), (0, 0), (pf, pf), (pt, pt)))
    win = sliding_window_view(xp, (kf, kt), axis=(2, 3))[:, :, ::sf, ::st]  # [B,Cin,Fo,To,Kf,Kt]
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(bsz * fo * to, cin * kf * kt)
    w2 = w.data.reshape(cout, cin * kf * kt)
    out_data = (cols @ w2.T).reshape(bsz, fo, to, cout).transpose(0, 3, 1, 2)
    out_data = np.ascontiguousarray(out_data)

    def backward(g):
        gflat = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(bsz * fo * to, cout)
        if w.requires_grad:
            gw = gflat.T @ cols
            w._accumulate(gw.reshape(cout, cin, kf, kt))
        if x.requires_grad:
            gcols = (gflat @ w2).reshape(bsz, fo, to, cin, kf, kt).transpose(0, 3, 1, 2, 4, 5)
            gxp = np.zeros_like(xp)
            for i in range(kf):
                for j in range(kt):
                    gxp[:, :, i : i + sf * fo : sf, j : j + st * to : st] += gcols[:, :, :, :, i, j]
            gx = gxp[:, :, pf : pf + f, pt : pt + t]
            x._accumulate(gx)

    return Tensor.from_op(out_data, (x, w), backward, "conv2d")


def conv1d_depthwise(x, w):
    """Depthwise 1D convolution over time with zero "same" padding.

    x: [B, C, T], w: [C, 1, K] with K odd; groups == C.
    """
    x = _as_tensor(x)
    w = _as_tensor(w)
    if x.ndim != 3 or w.ndim != 3 or w.shape[1] != 1:
        raise ContractError(f"conv1d_depthwise expects x [B,C,T], w [C,1,K]; got {x.shape}, {w.shape}")
    bsz, c, t = x.shape
    wc, _, k = w.shape
    if wc != c:
        raise ContractError(f"conv1d_depthwise channel mismatch: {x.shape} vs {w.shape}")
    if k % 2 == 0:
        raise ContractError(f"conv1d_depthwise requires an odd kernel, got K={k}")
    p = k // 2
    xp = np.pad(x.data, ((0, 0), (0, 0), (p, p)))
    win = sliding_window_view(xp, k, axis=2)  # [B,C,T,K]
    wk = w.data.reshape(c, k)
    out_data = np.einsum("bctk,ck->bct", win, wk, optimize=True)

    def backward(g):
        if w.requires_grad:
            gw = np.einsum("bctk,bct->ck", win, g, optimize=True)
            w._accumulate(gw.reshape(c, 1, k))
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for j in range(k):
                gxp[:, :, j : j + t] += g * wk[:, j][None, :, None]
            x._accumulate(gxp[:, :, p : p + t])

    return Tensor.from_op(np.ascontiguousarray(out_data), (x, w), backward, "conv1d_depthwise")


def nearest_upsample_time(x, factor):
    """Repeat each time step `factor` times along the last axis.

    out[..., t] == x[..., t // factor]; the gradient sums over repeats
    (the exact adjoint of nearest-neighbor upsampling).
    """
    x = _as_tensor(x)
    factor = int(factor)
    if factor <= 0:
        raise ContractError(f"upsample factor must be >= 1, got {factor}")
    if factor == 1:
        out_data = x.data.copy()
    else:
        out_data = np.repeat(x.data, factor, axis=-1)

    def backward(g):
        if x.requires_grad:
            if factor == 1:
                x._accumulate(g)
            else:
                x._accumulate(g.reshape(*x.data.shape, factor).sum(axis=-1))

    return Tensor.from_op(out_data, (x,), backward, "nearest_upsample_time")


# ---------------------------------------------------------------------
# attention
# ---------------------------------------------------------------------


def multi_head_attention(x, heads, wq, wk, wv, wo):
    """Scaled dot-product attention over the time axis.

    x: [B, T, D]; wq/wk/wv/wo: [D, D]; D must be divisible by `heads`.
    Per head: softmax(q k^T / sqrt(d)) v, heads concatenated, projected.
    """
    x = _as_tensor(x)
    if x.ndim != 3:
        raise ContractError(f"attention expects [B,T,D], got {x.shape}")
    bsz, t, d = x.shape
    if d % heads:
        raise ContractError(f"model dim {d} not divisible by {heads} heads")
    hd = d // heads

    def split_heads(y):
        return transpose(reshape(y, (bsz, t, heads, hd)), (0, 2, 1, 3))  # [B,H,T,hd]

    q = split_heads(matmul(x, wq))
    k = split_heads(matmul(x, wk))
    v = split_heads(matmul(x, wv))
    scores = mul(matmul(q, transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(hd))
    attn = softmax(scores, axis=-1)
    ctx = matmul(attn, v)  # [B,H,T,hd]
    merged = reshape(transpose(ctx, (0, 2, 1, 3)), (bsz, t, d))
    return matmul(merged, wo)


# ---------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------


def grad_check(f, params, eps=1e-5, max_coords=16, rng=None):
    """Compare reverse-mode gradients of scalar `f()` to central differences.

    `f` must rebuild its graph on every call from the same `params`
    (float64 leaf tensors with requires_grad=True). Checks up to
    `max_coords` randomly sampled coordinates per parameter and returns
    the maximum relative error over all of them.
    """
    if not 1e-6 <= eps <= 1e-4:
        raise ContractError(f"grad_check eps must be in [1e-6, 1e-4], got {eps}")
    for p in params:
        if p.data.dtype != np.float64:
            raise ContractError("grad_check requires float64 parameters")
        p.zero_grad()
    out = f()
    if out.data.size != 1:
        raise ContractError(f"grad_check target must be scalar, got shape {out.data.shape}")
    out.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    if rng is None:
        rng = np.random.default_rng(0)
    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.data.reshape(-1)
        n = flat.size
        idxs = np.arange(n) if n <= max_coords else rng.choice(n, size=max_coords, replace=False)
        gflat = ga.reshape(-1)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + eps
            fp = float(f().data.reshape(-1)[0])
            flat[i] = orig - eps
            fm = float(f().data.reshape(-1)[0])
            flat[i] = orig
            numeric = (fp - fm) / (2.0 * eps)
            rel = abs(numeric - gflat[i]) / (max(abs(numeric), abs(gflat[i])) + 1e-6)
            worst = max(worst, rel)
    for p in params:
        p.zero_grad()
    return worst

"""Reverse-mode automatic differentiation over dense N-d tensors.

Tape style: while a :class:`Graph` is active (one per thread), every op
appends a node holding its inputs and a backward closure. ``Graph.backward``
walks the tape once in reverse append order and accumulates gradients into
the participating leaf tensors. With no active graph the same ops run as
plain numpy computations, so inference pays no recording overhead.

The op set is exactly what the disparity pipeline needs (plus the small
amount of glue - stack/take/reshape/div - required to compose it); this is
not a general-purpose autodiff.
"""

from __future__ import annotations

import threading

import numpy as np

from . import kernels


class ShapeMismatchError(ValueError):
    """Raised when operand shapes are incompatible for an op."""


class UnknownOpError(ValueError):
    """Raised by forward_op for an unregistered op kind."""


class GraphError(RuntimeError):
    """Graph misuse: non-scalar loss, recording after backward, nesting."""


_TLS = threading.local()


def _active_graph():
    return getattr(_TLS, "graph", None)


class Tensor:
    """Dense real tensor with an optional gradient slot.

    ``data`` is always contiguous float32 or float64. ``grad`` is filled by
    ``Graph.backward`` for leaves with ``requires_grad`` set.
    """

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = np.ascontiguousarray(arr)
        self.grad = None
        self.requires_grad = bool(requires_grad)

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

    def item(self) -> float:
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return _result(self.data, False)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype.name}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return smul(self, -1.0)


def _result(data, requires_grad):
    t = Tensor.__new__(Tensor)
    t.data = data if data.flags.c_contiguous else np.ascontiguousarray(data)
    t.grad = None
    t.requires_grad = requires_grad
    return t


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x), dtype=dtype)


def constant(x, dtype=None) -> Tensor:
    return Tensor(np.asarray(x), requires_grad=False, dtype=dtype)


class _Node:
    __slots__ = ("op", "inputs", "out", "bwd")

    def __init__(self, op, inputs, out, bwd):
        self.op = op
        self.inputs = inputs
        self.out = out
        self.bwd = bwd


class Graph:
    """Append-only tape of recorded ops; confined to one thread."""

    def __init__(self):
        self.nodes: list[_Node] = []
        self._sealed = False

    def __enter__(self):
        if _active_graph() is not None:
            raise GraphError("a Graph is already active on this thread; graphs do not nest")
        _TLS.graph = self
        return self

    def __exit__(self, *exc):
        _TLS.graph = None
        return False

    def _record(self, op, inputs, out, bwd):
        if self._sealed:
            raise GraphError(f"graph already ran backward; cannot record {op!r}")
        self.nodes.append(_Node(op, inputs, out, bwd))

    def backward(self, loss: Tensor):
        """Accumulate d(loss)/d(leaf) into ``.grad`` of all requiring leaves.

        Returns a dict mapping each leaf tensor to its gradient array.
        """
        if not isinstance(loss, Tensor):
            raise GraphError("loss must be a Tensor")
        if loss.data.size != 1:
            raise GraphError(f"loss must be scalar, got shape {loss.data.shape}")
        self._sealed = True
        grads = {id(loss): np.ones_like(loss.data)}
        tensors = {id(loss): loss}
        produced = {id(n.out) for n in self.nodes}
        for node in reversed(self.nodes):
            gout = grads.pop(id(node.out), None)
            if gout is None:
                continue
            gins = node.bwd(gout)
            for t, gi in zip(node.inputs, gins):
                if gi is None or not t.requires_grad:
                    continue
                tid = id(t)
                tensors[tid] = t
                prev = grads.get(tid)
                grads[tid] = gi if prev is None else prev + gi
        out = {}
        for tid, g in grads.items():
            t = tensors.get(tid)
            if t is None or tid in produced:
                continue
            g = np.asarray(g, dtype=t.data.dtype).reshape(t.data.shape)
            t.grad = g if t.grad is None else t.grad + g
            out[t] = g
        return out


def backward(graph: Graph, loss: Tensor):
    """Module-level alias for ``graph.backward(loss)``."""
    return graph.backward(loss)


def _maybe_record(op, inputs, out, bwd):
    g = _active_graph()
    if g is not None and out.requires_grad:
        g._record(op, inputs, out, bwd)
    return out


def _check_dtype(op, *ts):
    dt = ts[0].data.dtype
    for t in ts[1:]:
        if t.data.dtype != dt:
            raise TypeError(f"{op}: mixed dtypes {dt.name} vs {t.data.dtype.name}")


def _broadcast_pair(op, a, b):
    try:
        return np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        sa, sb = a.data.shape, b.data.shape
        bad = []
        for i in range(1, min(len(sa), len(sb)) + 1):
            da, db = sa[-i], sb[-i]
            if da != db and da != 1 and db != 1:
                bad.append(f"axis -{i}: {da} vs {db}")
        raise ShapeMismatchError(
            f"{op}: shapes {sa} and {sb} not broadcastable ({'; '.join(bad) or 'rank mismatch'})"
        )


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    keep = tuple(i for i, (gd, sd) in enumerate(zip(g.shape, shape)) if sd == 1 and gd != 1)
    if keep:
        g = g.sum(axis=keep, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise / arithmetic
# ---------------------------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_dtype("add", a, b)
    _broadcast_pair("add", a, b)
    out = _result(a.data + b.data, a.requires_grad or b.requires_grad)

    def bwd(g):
        return (_unbroadcast(g, a.data.shape) if a.requires_grad else None,
                _unbroadcast(g, b.data.shape) if b.requires_grad else None)

    return _maybe_record("add", (a, b), out, bwd)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_dtype("sub", a, b)
    _broadcast_pair("sub", a, b)
    out = _result(a.data - b.data, a.requires_grad or b.requires_grad)

    def bwd(g):
        return (_unbroadcast(g, a.data.shape) if a.requires_grad else None,
                _unbroadcast(-g, b.data.shape) if b.requires_grad else None)

    return _maybe_record("sub", (a, b), out, bwd)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_dtype("mul", a, b)
    _broadcast_pair("mul", a, b)
    out = _result(a.data * b.data, a.requires_grad or b.requires_grad)

    def bwd(g):
        return (_unbroadcast(g * b.data, a.data.shape) if a.requires_grad else None,
                _unbroadcast(g * a.data, b.data.shape) if b.requires_grad else None)

    return _maybe_record("mul", (a, b), out, bwd)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_dtype("div", a, b)
    _broadcast_pair("div", a, b)
    out = _result(a.data / b.data, a.requires_grad or b.requires_grad)

    def bwd(g):
        ga = _unbroadcast(g / b.data, a.data.shape) if a.requires_grad else None
        gb = (_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)
              if b.requires_grad else None)
        return ga, gb

    return _maybe_record("div", (a, b), out, bwd)


def smul(a, value):
    a = as_tensor(a)
    s = a.data.dtype.type(value)
    out = _result(a.data * s, a.requires_grad)

    def bwd(g):
        return (g * s,)

    return _maybe_record("scalar-mul", (a,), out, bwd)


def absolute(a):
    a = as_tensor(a)
    out = _result(np.abs(a.data), a.requires_grad)

    def bwd(g):
        return (g * np.sign(a.data),)

    return _maybe_record("abs", (a,), out, bwd)


def exp(a):
    a = as_tensor(a)
    e = np.exp(a.data)
    out = _result(e, a.requires_grad)

    def bwd(g):
        return (g * e,)

    return _maybe_record("exp", (a,), out, bwd)


def leaky_relu(a, slope=0.1):
    a = as_tensor(a)
    s = a.data.dtype.type(slope)
    mask = a.data >= 0
    out = _result(np.where(mask, a.data, a.data * s), a.requires_grad)

    def bwd(g):
        return (np.where(mask, g, g * s),)

    return _maybe_record("leaky-relu", (a,), out, bwd)


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------

def _norm_axes(axes, ndim):
    if axes is None:
        return tuple(range(ndim))
    if isinstance(axes, int):
        axes = (axes,)
    return tuple(sorted(a % ndim for a in axes))


def mean(a, axes=None, keepdims=False):
    a = as_tensor(a)
    ax = _norm_axes(axes, a.data.ndim)
    out_data = a.data.mean(axis=ax, keepdims=keepdims)
    out = _result(np.asarray(out_data), a.requires_grad)
    n = 1
    for i in ax:
        n *= a.data.shape[i]

    def bwd(g):
        gk = g if keepdims else np.expand_dims(g, ax)
        return (np.broadcast_to(gk, a.data.shape) / n,)

    return _maybe_record("mean-reduce", (a,), out, bwd)


def variance(a, axis):
    """Population variance (divide by N) along a single axis."""
    a = as_tensor(a)
    axis = axis % a.data.ndim
    mu = a.data.mean(axis=axis, keepdims=True)
    dev = a.data - mu
    out = _result((dev * dev).mean(axis=axis), a.requires_grad)
    n = a.data.shape[axis]

    def bwd(g):
        return (np.expand_dims(g, axis) * dev * (2.0 / n),)

    return _maybe_record("variance-reduce", (a,), out, bwd)


def masked_variance(t, w, axis=0):
    """Population variance along ``axis`` over entries with positive weight.

    ``w`` holds constant 0/1 validity weights broadcastable to ``t``; every
    reduced slice needs at least one positive weight. Gradients flow to
    ``t`` only (the weights are data-dependent but piecewise constant).
    """
    t, w = as_tensor(t), as_tensor(w)
    _check_dtype("masked-variance", t, w)
    if w.requires_grad:
        raise GraphError("masked-variance weights must not require gradients")
    axis = axis % t.data.ndim
    _broadcast_pair("masked-variance", t, w)
    wsum = np.broadcast_to(w.data, np.broadcast_shapes(t.data.shape, w.data.shape)) \
        .sum(axis=axis, keepdims=True)
    if (wsum <= 0).any():
        raise ShapeMismatchError("masked-variance: some slices have zero total weight")
    mu = (w.data * t.data).sum(axis=axis, keepdims=True) / wsum
    dev = t.data - mu
    out_data = (w.data * dev * dev).sum(axis=axis) / np.squeeze(wsum, axis=axis)
    out = _result(np.asarray(out_data), t.requires_grad)

    def bwd(g):
        return (np.expand_dims(g, axis) * w.data * dev * (2.0 / wsum), None)

    return _maybe_record("masked-variance", (t, w), out, bwd)


def softmax(a, axis):
    a = as_tensor(a)
    axis = axis % a.data.ndim
    m = a.data.max(axis=axis, keepdims=True)
    e = np.exp(a.data - m)
    y = e / e.sum(axis=axis, keepdims=True)
    out = _result(y, a.requires_grad)

    def bwd(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        return (y * (g - dot),)

    return _maybe_record("softmax", (a,), out, bwd)


def inner(vec, t, axis=0):
    """Contract a 1-D sample vector against one axis of a tensor."""
    vec, t = as_tensor(vec), as_tensor(t)
    _check_dtype("inner-product", vec, t)
    if vec.data.ndim != 1:
        raise ShapeMismatchError(f"inner-product: first operand must be 1-D, got {vec.data.shape}")
    axis = axis % t.data.ndim
    if vec.data.shape[0] != t.data.shape[axis]:
        raise ShapeMismatchError(
            f"inner-product: vector length {vec.data.shape[0]} != tensor axis {axis} "
            f"length {t.data.shape[axis]}")
    tm = np.moveaxis(t.data, axis, 0)
    out = _result(np.tensordot(vec.data, tm, axes=([0], [0])), vec.requires_grad or t.requires_grad)

    def bwd(g):
        gvec = None
        gt = None
        if vec.requires_grad:
            gvec = tm.reshape(tm.shape[0], -1) @ g.ravel()
        if t.requires_grad:
            gt = np.multiply.outer(vec.data, g)
            gt = np.ascontiguousarray(np.moveaxis(gt, 0, axis))
        return gvec, gt

    return _maybe_record("inner-product", (vec, t), out, bwd)


# ---------------------------------------------------------------------------
# convolution / sampling
# ---------------------------------------------------------------------------

def conv2d(x, w, stride=1, dilation=1, padding=0):
    x, w = as_tensor(x), as_tensor(w)
    _check_dtype("conv2d", x, w)
    if x.data.ndim != 3 or w.data.ndim != 4:
        raise ShapeMismatchError(
            f"conv2d: expected input (C,X,Y) and weight (Co,Ci,kx,ky), got {x.data.shape} and {w.data.shape}")
    if x.data.shape[0] != w.data.shape[1]:
        raise ShapeMismatchError(
            f"conv2d: input channels {x.data.shape[0]} (input axis 0) != weight in-channels "
            f"{w.data.shape[1]} (weight axis 1)")
    out = _result(kernels.conv2d_forward(x.data, w.data, stride, dilation, padding),
                  x.requires_grad or w.requires_grad)

    def bwd(g):
        g = np.ascontiguousarray(g)
        gx = (kernels.conv2d_backward_input(g, w.data, x.data.shape, stride, dilation, padding)
              if x.requires_grad else None)
        gw = (kernels.conv2d_backward_weight(g, x.data, w.data.shape, stride, dilation, padding)
              if w.requires_grad else None)
        return gx, gw

    return _maybe_record("conv2d", (x, w), out, bwd)


def conv3d(x, w, stride=1, padding=0):
    x, w = as_tensor(x), as_tensor(w)
    _check_dtype("conv3d", x, w)
    if x.data.ndim != 4 or w.data.ndim != 5:
        raise ShapeMismatchError(
            f"conv3d: expected input (C,D,X,Y) and weight (Co,Ci,kd,kx,ky), got {x.data.shape} and {w.data.shape}")
    if x.data.shape[0] != w.data.shape[1]:
        raise ShapeMismatchError(
            f"conv3d: input channels {x.data.shape[0]} (input axis 0) != weight in-channels "
            f"{w.data.shape[1]} (weight axis 1)")
    out = _result(kernels.conv3d_forward(x.data, w.data, stride, padding),
                  x.requires_grad or w.requires_grad)

    def bwd(g):
        g = np.ascontiguousarray(g)
        gx = (kernels.conv3d_backward_input(g, w.data, x.data.shape, stride, padding)
              if x.requires_grad else None)
        gw = (kernels.conv3d_backward_weight(g, x.data, w.data.shape, stride, padding)
              if w.requires_grad else None)
        return gx, gw

    return _maybe_record("conv3d", (x, w), out, bwd)


def bilinear_sample(img, grid):
    """Sample (C,X,Y) at real coordinates grid=(2,Xo,Yo); border clamp.

    grid[0] holds coordinates along the first spatial axis of ``img``.
    """
    img, grid = as_tensor(img), as_tensor(grid)
    _check_dtype("bilinear-sample", img, grid)
    if img.data.ndim != 3:
        raise ShapeMismatchError(f"bilinear-sample: image must be (C,X,Y), got {img.data.shape}")
    if grid.data.ndim != 3 or grid.data.shape[0] != 2:
        raise ShapeMismatchError(f"bilinear-sample: grid must be (2,Xo,Yo), got {grid.data.shape}")
    cx = np.ascontiguousarray(grid.data[0])
    cy = np.ascontiguousarray(grid.data[1])
    out = _result(kernels.bilinear_forward(img.data, cx, cy),
                  img.requires_grad or grid.requires_grad)

    def bwd(g):
        gimg, gcx, gcy = kernels.bilinear_backward(img.data, cx, cy, np.ascontiguousarray(g))
        ggrid = np.stack([gcx, gcy]) if grid.requires_grad else None
        return (gimg if img.requires_grad else None), ggrid

    return _maybe_record("bilinear-sample", (img, grid), out, bwd)


# ---------------------------------------------------------------------------
# structural ops
# ---------------------------------------------------------------------------

def concat(ts, axis=0):
    ts = [as_tensor(t) for t in ts]
    if not ts:
        raise ShapeMismatchError("concat: empty input list")
    _check_dtype("concat", *ts)
    axis = axis % ts[0].data.ndim
    base = list(ts[0].data.shape)
    for t in ts[1:]:
        s = list(t.data.shape)
        s[axis] = base[axis]
        if s != base:
            raise ShapeMismatchError(
                f"concat: shape {t.data.shape} incompatible with {ts[0].data.shape} off axis {axis}")
    out = _result(np.concatenate([t.data for t in ts], axis=axis),
                  any(t.requires_grad for t in ts))
    sizes = [t.data.shape[axis] for t in ts]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        parts = np.split(g, splits, axis=axis)
        return tuple(np.ascontiguousarray(p) if t.requires_grad else None
                     for p, t in zip(parts, ts))

    return _maybe_record("concat", tuple(ts), out, bwd)


def stack(ts, axis=0):
    ts = [as_tensor(t) for t in ts]
    if not ts:
        raise ShapeMismatchError("stack: empty input list")
    _check_dtype("stack", *ts)
    for t in ts[1:]:
        if t.data.shape != ts[0].data.shape:
            raise ShapeMismatchError(
                f"stack: all shapes must match, got {ts[0].data.shape} vs {t.data.shape}")
    out = _result(np.stack([t.data for t in ts], axis=axis),
                  any(t.requires_grad for t in ts))
    ax = axis % out.data.ndim

    def bwd(g):
        return tuple(np.ascontiguousarray(np.take(g, i, axis=ax)) if t.requires_grad else None
                     for i, t in enumerate(ts))

    return _maybe_record("stack", tuple(ts), out, bwd)


def take(t, index, axis=0):
    """Select one slice along an axis (the axis is removed)."""
    t = as_tensor(t)
    axis = axis % t.data.ndim
    if not 0 <= index < t.data.shape[axis]:
        raise ShapeMismatchError(
            f"take: index {index} out of range for axis {axis} of length {t.data.shape[axis]}")
    out = _result(np.take(t.data, index, axis=axis), t.requires_grad)

    def bwd(g):
        gt = np.zeros_like(t.data)
        sl = (slice(None),) * axis + (index,)
        gt[sl] = g
        return (gt,)

    return _maybe_record("take", (t,), out, bwd)


def reshape(t, shape):
    t = as_tensor(t)
    out = _result(t.data.reshape(shape), t.requires_grad)

    def bwd(g):
        return (g.reshape(t.data.shape),)

    return _maybe_record("reshape", (t,), out, bwd)


def avg_pool(t, k=2):
    """Non-overlapping k-by-k average pooling on the last two axes."""
    t = as_tensor(t)
    *lead, h, w = t.data.shape
    if h % k or w % k:
        raise ShapeMismatchError(f"avg-pool: spatial dims ({h},{w}) not divisible by k={k}")
    view = t.data.reshape(*lead, h // k, k, w // k, k)
    out = _result(np.ascontiguousarray(view.mean(axis=(-3, -1))), t.requires_grad)

    def bwd(g):
        gexp = np.broadcast_to(g[..., :, None, :, None], view.shape)
        return (np.ascontiguousarray(gexp.reshape(t.data.shape) / (k * k)),)

    return _maybe_record("avg-pool", (t,), out, bwd)


_INTERP_CACHE: dict = {}


def _nearest_matrix(n_in, n_out, dtype):
    key = ("nearest", n_in, n_out, np.dtype(dtype).name)
    m = _INTERP_CACHE.get(key)
    if m is None:
        m = np.zeros((n_out, n_in), dtype=dtype)
        for i in range(n_out):
            m[i, i * n_in // n_out] = 1.0
        _INTERP_CACHE[key] = m
    return m


def _linear_matrix(n_in, n_out, dtype):
    # align-corners endpoints map exactly
    key = ("linear", n_in, n_out, np.dtype(dtype).name)
    m = _INTERP_CACHE.get(key)
    if m is None:
        m = np.zeros((n_out, n_in), dtype=dtype)
        if n_out == 1 or n_in == 1:
            m[:, 0] = 1.0
        else:
            for i in range(n_out):
                pos = i * (n_in - 1) / (n_out - 1)
                lo = min(int(np.floor(pos)), n_in - 1)
                frac = pos - lo
                m[i, lo] += 1.0 - frac
                m[i, min(lo + 1, n_in - 1)] += frac
        _INTERP_CACHE[key] = m
    return m


def _matvec_axis(data, m, axis):
    moved = np.moveaxis(data, axis, 0)
    flat = moved.reshape(moved.shape[0], -1)
    res = m @ flat
    res = res.reshape((m.shape[0],) + moved.shape[1:])
    return np.ascontiguousarray(np.moveaxis(res, 0, axis))


def _resample(t, sizes, axes, matrix_fn, name):
    t = as_tensor(t)
    mats = [matrix_fn(t.data.shape[ax], n, t.data.dtype) for ax, n in zip(axes, sizes)]
    data = t.data
    for m, ax in zip(mats, axes):
        data = _matvec_axis(data, m, ax)
    out = _result(data, t.requires_grad)

    def bwd(g):
        for m, ax in zip(reversed(mats), reversed(axes)):
            g = _matvec_axis(g, m.T, ax)
        return (g,)

    return _maybe_record(name, (t,), out, bwd)


def upsample_nearest(t, size):
    """Nearest-neighbor resample of the last two axes to ``size=(Xo,Yo)``."""
    t = as_tensor(t)
    if t.data.ndim < 2 or len(size) != 2:
        raise ShapeMismatchError(f"nearest-upsample: need 2 trailing spatial axes and size pair, got "
                                 f"shape {t.data.shape}, size {size}")
    return _resample(t, size, (t.data.ndim - 2, t.data.ndim - 1), _nearest_matrix, "nearest-upsample")


def upsample_trilinear(t, size):
    """Linear resample of the last three axes to ``size=(Do,Xo,Yo)`` (align corners)."""
    t = as_tensor(t)
    if t.data.ndim < 3 or len(size) != 3:
        raise ShapeMismatchError(f"trilinear-upsample: need 3 trailing axes and size triple, got "
                                 f"shape {t.data.shape}, size {size}")
    nd = t.data.ndim
    return _resample(t, size, (nd - 3, nd - 2, nd - 1), _linear_matrix, "trilinear-upsample")


def spatial_gradient(t):
    """Forward differences along the last two axes, stacked on a new axis 0.

    Replicate boundary: the last row/column of each difference is zero.
    """
    t = as_tensor(t)
    if t.data.ndim < 2:
        raise ShapeMismatchError(f"spatial-gradient: need >=2 dims, got {t.data.shape}")
    gx = np.zeros_like(t.data)
    gy = np.zeros_like(t.data)
    gx[..., :-1, :] = t.data[..., 1:, :] - t.data[..., :-1, :]
    gy[..., :, :-1] = t.data[..., :, 1:] - t.data[..., :, :-1]
    out = _result(np.stack([gx, gy]), t.requires_grad)

    def bwd(g):
        gt = np.zeros_like(t.data)
        g0, g1 = g[0], g[1]
        gt[..., 1:, :] += g0[..., :-1, :]
        gt[..., :-1, :] -= g0[..., :-1, :]
        gt[..., :, 1:] += g1[..., :, :-1]
        gt[..., :, :-1] -= g1[..., :, :-1]
        return (gt,)

    return _maybe_record("spatial-gradient", (t,), out, bwd)


def rotate90(t, k=1, axes=(-2, -1)):
    """Quarter-turn rotation in the plane of the given axes."""
    t = as_tensor(t)
    axes = tuple(a % t.data.ndim for a in axes)
    out = _result(np.ascontiguousarray(np.rot90(t.data, k=k, axes=axes)), t.requires_grad)

    def bwd(g):
        return (np.ascontiguousarray(np.rot90(g, k=-k, axes=axes)),)

    return _maybe_record("rotate90", (t,), out, bwd)


# ---------------------------------------------------------------------------
# generic dispatch
# ---------------------------------------------------------------------------

_FORWARD_TABLE = {
    "add": lambda ins, at: add(*ins),
    "sub": lambda ins, at: sub(*ins),
    "mul": lambda ins, at: mul(*ins),
    "div": lambda ins, at: div(*ins),
    "scalar-mul": lambda ins, at: smul(ins[0], at["value"]),
    "abs": lambda ins, at: absolute(ins[0]),
    "exp": lambda ins, at: exp(ins[0]),
    "leaky-relu": lambda ins, at: leaky_relu(ins[0], at.get("slope", 0.1)),
    "conv2d": lambda ins, at: conv2d(ins[0], ins[1], at.get("stride", 1),
                                     at.get("dilation", 1), at.get("padding", 0)),
    "conv3d": lambda ins, at: conv3d(ins[0], ins[1], at.get("stride", 1), at.get("padding", 0)),
    "mean-reduce": lambda ins, at: mean(ins[0], at.get("axes"), at.get("keepdims", False)),
    "variance-reduce": lambda ins, at: variance(ins[0], at["axis"]),
    "masked-variance": lambda ins, at: masked_variance(ins[0], ins[1], at.get("axis", 0)),
    "softmax": lambda ins, at: softmax(ins[0], at["axis"]),
    "inner-product": lambda ins, at: inner(ins[0], ins[1], at.get("axis", 0)),
    "bilinear-sample": lambda ins, at: bilinear_sample(ins[0], ins[1]),
    "concat": lambda ins, at: concat(list(ins), at.get("axis", 0)),
    "stack": lambda ins, at: stack(list(ins), at.get("axis", 0)),
    "take": lambda ins, at: take(ins[0], at["index"], at.get("axis", 0)),
    "reshape": lambda ins, at: reshape(ins[0], tuple(at["shape"])),
    "avg-pool": lambda ins, at: avg_pool(ins[0], at.get("k", 2)),
    "nearest-upsample": lambda ins, at: upsample_nearest(ins[0], tuple(at["size"])),
    "trilinear-upsample": lambda ins, at: upsample_trilinear(ins[0], tuple(at["size"])),
    "spatial-gradient": lambda ins, at: spatial_gradient(ins[0]),
    "rotate90": lambda ins, at: rotate90(ins[0], at.get("k", 1), tuple(at.get("axes", (-2, -1)))),
}


def op_kinds():
    return sorted(_FORWARD_TABLE)


def forward_op(kind, inputs, attrs=None):
    """Apply a registered op by name; appends a node if a graph is active."""
    fn = _FORWARD_TABLE.get(kind)
    if fn is None:
        raise UnknownOpError(f"unknown op kind {kind!r}; known: {', '.join(op_kinds())}")
    return fn(tuple(inputs), attrs or {})

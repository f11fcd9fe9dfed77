"""Finite-difference verification of every registered differentiable op.

All checks run in double precision with central differences. Random inputs
stay away from non-differentiable points (zero for abs/leaky-relu, integer
lattice and borders for bilinear sampling).
"""

from __future__ import annotations

import numpy as np

from .autodiff import Graph, Tensor, forward_op, op_kinds

FD_STEP = 1e-5


def _t(rng, shape, lo=-1.0, hi=1.0):
    return Tensor(rng.uniform(lo, hi, size=shape), requires_grad=True, dtype=np.float64)


def _t_offzero(rng, shape, margin=0.2):
    mag = rng.uniform(margin, 1.0, size=shape)
    sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return Tensor(mag * sign, requires_grad=True, dtype=np.float64)


def _grid_case(rng, img_shape, out_shape):
    # in-bounds coordinates with fractional parts in [0.15, 0.85]
    _, h, w = img_shape
    bx = rng.integers(1, h - 2, size=out_shape)
    by = rng.integers(1, w - 2, size=out_shape)
    cx = bx + rng.uniform(0.15, 0.85, size=out_shape)
    cy = by + rng.uniform(0.15, 0.85, size=out_shape)
    return Tensor(np.stack([cx, cy]), requires_grad=True, dtype=np.float64)


def _mask_case(rng):
    # validity weights: first view always on, others random, no zero slices
    w = (rng.random((3, 1, 8, 8)) < 0.7).astype(np.float64)
    w[0] = 1.0
    return Tensor(w, requires_grad=False, dtype=np.float64)


def _case_table(rng):
    return {
        "add": lambda: ([_t(rng, (8, 8)), _t(rng, (8, 8))], {}),
        "sub": lambda: ([_t(rng, (8, 8)), _t(rng, (8, 8))], {}),
        "mul": lambda: ([_t(rng, (8, 8)), _t(rng, (8, 8))], {}),
        "div": lambda: ([_t(rng, (8, 8)), _t_offzero(rng, (8, 8), 0.5)], {}),
        "scalar-mul": lambda: ([_t(rng, (8, 8))], {"value": 1.7}),
        "abs": lambda: ([_t_offzero(rng, (8, 8))], {}),
        "exp": lambda: ([_t(rng, (8, 8))], {}),
        "leaky-relu": lambda: ([_t_offzero(rng, (8, 8))], {"slope": 0.1}),
        "conv2d": lambda: ([_t(rng, (3, 8, 8)), _t(rng, (4, 3, 3, 3))],
                           {"stride": int(rng.integers(1, 3)),
                            "dilation": int(rng.integers(1, 3)),
                            "padding": int(rng.integers(0, 3))}),
        "conv3d": lambda: ([_t(rng, (2, 4, 8, 8)), _t(rng, (3, 2, 3, 3, 3))],
                           {"stride": int(rng.integers(1, 3)),
                            "padding": int(rng.integers(0, 2))}),
        "mean-reduce": lambda: ([_t(rng, (3, 8, 8))], {"axes": (0, 2)}),
        "variance-reduce": lambda: ([_t(rng, (3, 8, 8))], {"axis": 0}),
        "masked-variance": lambda: ([_t(rng, (3, 2, 8, 8)), _mask_case(rng)], {"axis": 0}),
        "softmax": lambda: ([_t(rng, (5, 8, 8), -3, 3)], {"axis": 0}),
        "inner-product": lambda: ([_t(rng, (5,)), _t(rng, (5, 8, 8))], {"axis": 0}),
        "bilinear-sample": lambda: ([_t(rng, (2, 8, 8)), _grid_case(rng, (2, 8, 8), (6, 6))], {}),
        "concat": lambda: ([_t(rng, (2, 8, 8)), _t(rng, (3, 8, 8))], {"axis": 0}),
        "stack": lambda: ([_t(rng, (8, 8)), _t(rng, (8, 8)), _t(rng, (8, 8))], {"axis": 0}),
        "take": lambda: ([_t(rng, (4, 8, 8))], {"index": 2, "axis": 0}),
        "reshape": lambda: ([_t(rng, (4, 16))], {"shape": (8, 8)}),
        "avg-pool": lambda: ([_t(rng, (2, 8, 8))], {"k": 2}),
        "nearest-upsample": lambda: ([_t(rng, (2, 4, 4))], {"size": (8, 8)}),
        "trilinear-upsample": lambda: ([_t(rng, (2, 3, 4, 4))], {"size": (5, 8, 8)}),
        "spatial-gradient": lambda: ([_t(rng, (2, 8, 8))], {}),
        "rotate90": lambda: ([_t(rng, (2, 8, 8))], {"k": 1}),
    }


def _proj_loss(out, proj):
    return float(np.sum(out.data * proj))


def _analytic_grads(kind, inputs, attrs, proj):
    for t in inputs:
        t.grad = None
    g = Graph()
    with g:
        out = forward_op(kind, inputs, attrs)
        # project to a scalar through the same tape
        loss = forward_op("mean-reduce", [forward_op("mul", [out, Tensor(proj)], {})], {})
    g.backward(loss)
    scale = 1.0 / out.data.size  # mean-reduce divides by the element count
    return [None if t.grad is None else t.grad / scale for t in inputs], out.data.size


def _numeric_grad(kind, inputs, attrs, proj, which, step=FD_STEP):
    base = inputs[which].data
    g = np.zeros_like(base)
    flat = base.ravel()
    gflat = g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        f_hi = _proj_loss(forward_op(kind, inputs, attrs), proj)
        flat[i] = orig - step
        f_lo = _proj_loss(forward_op(kind, inputs, attrs), proj)
        flat[i] = orig
        gflat[i] = (f_hi - f_lo) / (2 * step)
    return g


def gradcheck_op(kind, trials=10, seed=0):
    """Max relative error |analytic - numeric| / max(1, |numeric|) over trials."""
    rng = np.random.default_rng(seed)
    table = _case_table(rng)
    if kind not in table:
        raise KeyError(f"no gradcheck case for op kind {kind!r}")
    worst = 0.0
    for _ in range(trials):
        inputs, attrs = table[kind]()
        probe = forward_op(kind, inputs, attrs)
        proj = rng.standard_normal(probe.data.shape)
        analytic, _ = _analytic_grads(kind, inputs, attrs, proj)
        for which, ga in enumerate(analytic):
            if ga is None:
                continue
            gn = _numeric_grad(kind, inputs, attrs, proj, which)
            err = np.abs(ga - gn) / np.maximum(1.0, np.abs(gn))
            worst = max(worst, float(err.max()))
    return worst


def run_suite(trials=10, seed=0):
    """Gradcheck every registered op; returns {kind: max relative error}."""
    results = {}
    for i, kind in enumerate(op_kinds()):
        results[kind] = gradcheck_op(kind, trials=trials, seed=seed + i)
    return results

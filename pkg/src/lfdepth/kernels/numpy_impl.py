"""Pure-numpy fallback kernels.

Convolutions go through im2col views plus BLAS tensordot; bilinear sampling
uses fancy-indexed gathers with bincount scatters on the backward pass.
Results agree with the numba implementations up to floating-point rounding.
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided


def _conv2d_cols(xp, kh, kw, ho, wo, stride, dilation):
    s0, s1, s2 = xp.strides
    shape = (xp.shape[0], kh, kw, ho, wo)
    strides = (s0, s1 * dilation, s2 * dilation, s1 * stride, s2 * stride)
    return as_strided(xp, shape=shape, strides=strides)


def conv2d_forward(x, w, stride, dilation, padding):
    cin, h, wid = x.shape
    cout, _, kh, kw = w.shape
    ho = (h + 2 * padding - dilation * (kh - 1) - 1) // stride + 1
    wo = (wid + 2 * padding - dilation * (kw - 1) - 1) // stride + 1
    xp = np.pad(x, ((0, 0), (padding, padding), (padding, padding))) if padding else x
    cols = _conv2d_cols(xp, kh, kw, ho, wo, stride, dilation)
    out = np.tensordot(w, cols, axes=([1, 2, 3], [0, 1, 2]))
    return np.ascontiguousarray(out)


def conv2d_backward_input(gout, w, cin, h, wid, stride, dilation, padding):
    cout, _, kh, kw = w.shape
    gcol = np.tensordot(w, gout, axes=([0], [0]))  # (cin, kh, kw, ho, wo)
    _, ho, wo = gout.shape
    gxp = np.zeros((cin, h + 2 * padding, wid + 2 * padding), dtype=gout.dtype)
    for ky in range(kh):
        for kx in range(kw):
            gxp[:,
                ky * dilation: ky * dilation + (ho - 1) * stride + 1: stride,
                kx * dilation: kx * dilation + (wo - 1) * stride + 1: stride,
                ] += gcol[:, ky, kx]
    if padding:
        return np.ascontiguousarray(gxp[:, padding:padding + h, padding:padding + wid])
    return gxp


def conv2d_backward_weight(gout, x, cout, cin, kh, kw, stride, dilation, padding):
    _, ho, wo = gout.shape
    xp = np.pad(x, ((0, 0), (padding, padding), (padding, padding))) if padding else x
    cols = _conv2d_cols(xp, kh, kw, ho, wo, stride, dilation)
    gw = np.tensordot(gout, cols, axes=([1, 2], [3, 4]))
    return np.ascontiguousarray(gw)


def _conv3d_cols(xp, kd, kh, kw, do, ho, wo, stride):
    s0, s1, s2, s3 = xp.strides
    shape = (xp.shape[0], kd, kh, kw, do, ho, wo)
    strides = (s0, s1, s2, s3, s1 * stride, s2 * stride, s3 * stride)
    return as_strided(xp, shape=shape, strides=strides)


def conv3d_forward(x, w, stride, padding):
    cin, d, h, wid = x.shape
    cout, _, kd, kh, kw = w.shape
    do = (d + 2 * padding - kd) // stride + 1
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (wid + 2 * padding - kw) // stride + 1
    p = padding
    xp = np.pad(x, ((0, 0), (p, p), (p, p), (p, p))) if p else x
    cols = _conv3d_cols(xp, kd, kh, kw, do, ho, wo, stride)
    out = np.tensordot(w, cols, axes=([1, 2, 3, 4], [0, 1, 2, 3]))
    return np.ascontiguousarray(out)


def conv3d_backward_input(gout, w, cin, d, h, wid, stride, padding):
    cout, _, kd, kh, kw = w.shape
    _, do, ho, wo = gout.shape
    p = padding
    gcol = np.tensordot(w, gout, axes=([0], [0]))  # (cin, kd, kh, kw, do, ho, wo)
    gxp = np.zeros((cin, d + 2 * p, h + 2 * p, wid + 2 * p), dtype=gout.dtype)
    for kz in range(kd):
        for ky in range(kh):
            for kx in range(kw):
                gxp[:,
                    kz: kz + (do - 1) * stride + 1: stride,
                    ky: ky + (ho - 1) * stride + 1: stride,
                    kx: kx + (wo - 1) * stride + 1: stride,
                    ] += gcol[:, kz, ky, kx]
    if p:
        return np.ascontiguousarray(gxp[:, p:p + d, p:p + h, p:p + wid])
    return gxp


def conv3d_backward_weight(gout, x, cout, cin, kd, kh, kw, stride, padding):
    _, do, ho, wo = gout.shape
    p = padding
    xp = np.pad(x, ((0, 0), (p, p), (p, p), (p, p))) if p else x
    cols = _conv3d_cols(xp, kd, kh, kw, do, ho, wo, stride)
    gw = np.tensordot(gout, cols, axes=([1, 2, 3], [4, 5, 6]))
    return np.ascontiguousarray(gw)


def _corners(img_shape, cx, cy):
    _, h, w = img_shape
    fx = np.clip(cx, 0.0, h - 1.0)
    fy = np.clip(cy, 0.0, w - 1.0)
    x0 = np.floor(fx).astype(np.int64)
    y0 = np.floor(fy).astype(np.int64)
    x1 = np.minimum(x0 + 1, h - 1)
    y1 = np.minimum(y0 + 1, w - 1)
    ax = (fx - x0).astype(img_dtype_of(cx))
    ay = (fy - y0).astype(img_dtype_of(cy))
    return x0, x1, y0, y1, ax, ay


def img_dtype_of(arr):
    return arr.dtype


def bilinear_forward(img, cx, cy):
    x0, x1, y0, y1, ax, ay = _corners(img.shape, cx, cy)
    v00 = img[:, x0, y0]
    v10 = img[:, x1, y0]
    v01 = img[:, x0, y1]
    v11 = img[:, x1, y1]
    out = (v00 * (1 - ax) * (1 - ay) + v10 * ax * (1 - ay)
           + v01 * (1 - ax) * ay + v11 * ax * ay)
    return np.ascontiguousarray(out)


def bilinear_backward(img, cx, cy, gout):
    c, h, w = img.shape
    x0, x1, y0, y1, ax, ay = _corners(img.shape, cx, cy)
    v00 = img[:, x0, y0]
    v10 = img[:, x1, y0]
    v01 = img[:, x0, y1]
    v11 = img[:, x1, y1]

    gcx = (gout * ((v10 - v00) * (1 - ay) + (v11 - v01) * ay)).sum(axis=0)
    gcy = (gout * ((v01 - v00) * (1 - ax) + (v11 - v10) * ax)).sum(axis=0)
    gcx = np.where((cx >= 0) & (cx <= h - 1), gcx, 0.0).astype(img.dtype)
    gcy = np.where((cy >= 0) & (cy <= w - 1), gcy, 0.0).astype(img.dtype)

    coff = (np.arange(c, dtype=np.int64) * (h * w))[:, None, None]
    gflat = np.zeros(c * h * w, dtype=np.float64)
    for xi, yi, wgt in ((x0, y0, (1 - ax) * (1 - ay)),
                        (x1, y0, ax * (1 - ay)),
                        (x0, y1, (1 - ax) * ay),
                        (x1, y1, ax * ay)):
        idx = (coff + xi * w + yi).ravel()
        gflat += np.bincount(idx, weights=(gout * wgt).ravel(), minlength=c * h * w)
    gimg = gflat.reshape(c, h, w).astype(img.dtype)
    return gimg, gcx, gcy

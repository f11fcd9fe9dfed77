"""Numba-jitted kernels for the hot inner loops.

Loop nests are ordered so the innermost index walks the contiguous output
axis, letting LLVM vectorize. All kernels are dtype-generic (float32 for
training, float64 for gradient checks) and deterministic: every output cell
is accumulated by exactly one sequential loop.
"""

import numba as nb
import numpy as np

_JIT = dict(cache=True, fastmath=True, nogil=True)


@nb.njit(**_JIT)
def conv2d_forward(x, w, stride, dilation, padding):
    cin, h, wid = x.shape
    cout, _, kh, kw = w.shape
    ho = (h + 2 * padding - dilation * (kh - 1) - 1) // stride + 1
    wo = (wid + 2 * padding - dilation * (kw - 1) - 1) // stride + 1
    out = np.zeros((cout, ho, wo), dtype=x.dtype)
    for co in range(cout):
        for ci in range(cin):
            for ky in range(kh):
                for kx in range(kw):
                    wv = w[co, ci, ky, kx]
                    off = kx * dilation - padding
                    lo = (-off + stride - 1) // stride
                    if lo < 0:
                        lo = 0
                    hi = (wid - 1 - off) // stride
                    if hi > wo - 1:
                        hi = wo - 1
                    for oy in range(ho):
                        iy = oy * stride - padding + ky * dilation
                        if iy < 0 or iy >= h:
                            continue
                        for ox in range(lo, hi + 1):
                            out[co, oy, ox] += wv * x[ci, iy, off + ox * stride]
    return out


@nb.njit(**_JIT)
def conv2d_backward_input(gout, w, cin, h, wid, stride, dilation, padding):
    cout, _, kh, kw = w.shape
    _, ho, wo = gout.shape
    gx = np.zeros((cin, h, wid), dtype=gout.dtype)
    for co in range(cout):
        for ci in range(cin):
            for ky in range(kh):
                for kx in range(kw):
                    wv = w[co, ci, ky, kx]
                    off = kx * dilation - padding
                    lo = (-off + stride - 1) // stride
                    if lo < 0:
                        lo = 0
                    hi = (wid - 1 - off) // stride
                    if hi > wo - 1:
                        hi = wo - 1
                    for oy in range(ho):
                        iy = oy * stride - padding + ky * dilation
                        if iy < 0 or iy >= h:
                            continue
                        for ox in range(lo, hi + 1):
                            gx[ci, iy, off + ox * stride] += wv * gout[co, oy, ox]
    return gx


@nb.njit(**_JIT)
def conv2d_backward_weight(gout, x, cout, cin, kh, kw, stride, dilation, padding):
    _, h, wid = x.shape
    _, ho, wo = gout.shape
    gw = np.zeros((cout, cin, kh, kw), dtype=gout.dtype)
    for co in range(cout):
        for ci in range(cin):
            for ky in range(kh):
                for kx in range(kw):
                    off = kx * dilation - padding
                    lo = (-off + stride - 1) // stride
                    if lo < 0:
                        lo = 0
                    hi = (wid - 1 - off) // stride
                    if hi > wo - 1:
                        hi = wo - 1
                    acc = 0.0
                    for oy in range(ho):
                        iy = oy * stride - padding + ky * dilation
                        if iy < 0 or iy >= h:
                            continue
                        for ox in range(lo, hi + 1):
                            acc += gout[co, oy, ox] * x[ci, iy, off + ox * stride]
                    gw[co, ci, ky, kx] = acc
    return gw


@nb.njit(**_JIT)
def conv3d_forward(x, w, stride, padding):
    cin, d, h, wid = x.shape
    cout, _, kd, kh, kw = w.shape
    do = (d + 2 * padding - kd) // stride + 1
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (wid + 2 * padding - kw) // stride + 1
    out = np.zeros((cout, do, ho, wo), dtype=x.dtype)
    for co in range(cout):
        for ci in range(cin):
            for kz in range(kd):
                for ky in range(kh):
                    for kx in range(kw):
                        wv = w[co, ci, kz, ky, kx]
                        off = kx - padding
                        lo = (-off + stride - 1) // stride
                        if lo < 0:
                            lo = 0
                        hi = (wid - 1 - off) // stride
                        if hi > wo - 1:
                            hi = wo - 1
                        for oz in range(do):
                            iz = oz * stride - padding + kz
                            if iz < 0 or iz >= d:
                                continue
                            for oy in range(ho):
                                iy = oy * stride - padding + ky
                                if iy < 0 or iy >= h:
                                    continue
                                for ox in range(lo, hi + 1):
                                    out[co, oz, oy, ox] += wv * x[ci, iz, iy, off + ox * stride]
    return out


@nb.njit(**_JIT)
def conv3d_backward_input(gout, w, cin, d, h, wid, stride, padding):
    cout, _, kd, kh, kw = w.shape
    _, do, ho, wo = gout.shape
    gx = np.zeros((cin, d, h, wid), dtype=gout.dtype)
    for co in range(cout):
        for ci in range(cin):
            for kz in range(kd):
                for ky in range(kh):
                    for kx in range(kw):
                        wv = w[co, ci, kz, ky, kx]
                        off = kx - padding
                        lo = (-off + stride - 1) // stride
                        if lo < 0:
                            lo = 0
                        hi = (wid - 1 - off) // stride
                        if hi > wo - 1:
                            hi = wo - 1
                        for oz in range(do):
                            iz = oz * stride - padding + kz
                            if iz < 0 or iz >= d:
                                continue
                            for oy in range(ho):
                                iy = oy * stride - padding + ky
                                if iy < 0 or iy >= h:
                                    continue
                                for ox in range(lo, hi + 1):
                                    gx[ci, iz, iy, off + ox * stride] += wv * gout[co, oz, oy, ox]
    return gx


@nb.njit(**_JIT)
def conv3d_backward_weight(gout, x, cout, cin, kd, kh, kw, stride, padding):
    _, d, h, wid = x.shape
    _, do, ho, wo = gout.shape
    gw = np.zeros((cout, cin, kd, kh, kw), dtype=gout.dtype)
    for co in range(cout):
        for ci in range(cin):
            for kz in range(kd):
                for ky in range(kh):
                    for kx in range(kw):
                        off = kx - padding
                        lo = (-off + stride - 1) // stride
                        if lo < 0:
                            lo = 0
                        hi = (wid - 1 - off) // stride
                        if hi > wo - 1:
                            hi = wo - 1
                        acc = 0.0
                        for oz in range(do):
                            iz = oz * stride - padding + kz
                            if iz < 0 or iz >= d:
                                continue
                            for oy in range(ho):
                                iy = oy * stride - padding + ky
                                if iy < 0 or iy >= h:
                                    continue
                                for ox in range(lo, hi + 1):
                                    acc += gout[co, oz, oy, ox] * x[ci, iz, iy, off + ox * stride]
                        gw[co, ci, kz, ky, kx] = acc
    return gw


@nb.njit(**_JIT)
def bilinear_forward(img, cx, cy):
    c, h, w = img.shape
    ho, wo = cx.shape
    out = np.empty((c, ho, wo), dtype=img.dtype)
    for oy in range(ho):
        for ox in range(wo):
            fx = cx[oy, ox]
            if fx < 0.0:
                fx = 0.0
            elif fx > h - 1:
                fx = h - 1.0
            fy = cy[oy, ox]
            if fy < 0.0:
                fy = 0.0
            elif fy > w - 1:
                fy = w - 1.0
            x0 = int(fx)
            y0 = int(fy)
            x1 = x0 + 1 if x0 + 1 < h else h - 1
            y1 = y0 + 1 if y0 + 1 < w else w - 1
            ax = fx - x0
            ay = fy - y0
            for ch in range(c):
                v00 = img[ch, x0, y0]
                v10 = img[ch, x1, y0]
                v01 = img[ch, x0, y1]
                v11 = img[ch, x1, y1]
                out[ch, oy, ox] = (v00 * (1.0 - ax) * (1.0 - ay)
                                   + v10 * ax * (1.0 - ay)
                                   + v01 * (1.0 - ax) * ay
                                   + v11 * ax * ay)
    return out


@nb.njit(**_JIT)
def bilinear_backward(img, cx, cy, gout):
    c, h, w = img.shape
    ho, wo = cx.shape
    gimg = np.zeros((c, h, w), dtype=img.dtype)
    gcx = np.zeros((ho, wo), dtype=img.dtype)
    gcy = np.zeros((ho, wo), dtype=img.dtype)
    for oy in range(ho):
        for ox in range(wo):
            rx = cx[oy, ox]
            ry = cy[oy, ox]
            # zero coordinate gradient where the clamp is active
            inx = 0.0 <= rx <= h - 1
            iny = 0.0 <= ry <= w - 1
            fx = min(max(rx, 0.0), h - 1.0)
            fy = min(max(ry, 0.0), w - 1.0)
            x0 = int(fx)
            y0 = int(fy)
            x1 = x0 + 1 if x0 + 1 < h else h - 1
            y1 = y0 + 1 if y0 + 1 < w else w - 1
            ax = fx - x0
            ay = fy - y0
            accx = 0.0
            accy = 0.0
            for ch in range(c):
                g = gout[ch, oy, ox]
                v00 = img[ch, x0, y0]
                v10 = img[ch, x1, y0]
                v01 = img[ch, x0, y1]
                v11 = img[ch, x1, y1]
                gimg[ch, x0, y0] += g * (1.0 - ax) * (1.0 - ay)
                gimg[ch, x1, y0] += g * ax * (1.0 - ay)
                gimg[ch, x0, y1] += g * (1.0 - ax) * ay
                gimg[ch, x1, y1] += g * ax * ay
                accx += g * ((v10 - v00) * (1.0 - ay) + (v11 - v01) * ay)
                accy += g * ((v01 - v00) * (1.0 - ax) + (v11 - v10) * ax)
            if inx:
                gcx[oy, ox] = accx
            if iny:
                gcy[oy, ox] = accy
    return gimg, gcx, gcy

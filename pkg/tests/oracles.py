"""Independent reference implementations used as test oracles.

Everything here is written as literal per-pixel/per-element loops, kept
deliberately separate from the vectorized library code it checks.
"""

import math

import numpy as np


def finite_difference_grad(fn, arr, step=1e-5):
    """Central finite differences of scalar fn(arr) w.r.t. every element."""
    g = np.zeros_like(arr, dtype=np.float64)
    flat = arr.ravel()
    gflat = g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = fn()
        flat[i] = orig - step
        lo = fn()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * step)
    return g


def rel_err(analytic, numeric):
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))))


def variance_population(values):
    mu = sum(values) / len(values)
    return sum((v - mu) ** 2 for v in values) / len(values)


def conv2d_reference(x, w, stride, dilation, padding):
    """Direct-loop 2D convolution (cross-correlation) oracle."""
    cin, h, wid = x.shape
    cout, _, kh, kw = w.shape
    ho = (h + 2 * padding - dilation * (kh - 1) - 1) // stride + 1
    wo = (wid + 2 * padding - dilation * (kw - 1) - 1) // stride + 1
    out = np.zeros((cout, ho, wo))
    for co in range(cout):
        for oy in range(ho):
            for ox in range(wo):
                acc = 0.0
                for ci in range(cin):
                    for ky in range(kh):
                        for kx in range(kw):
                            iy = oy * stride - padding + ky * dilation
                            ix = ox * stride - padding + kx * dilation
                            if 0 <= iy < h and 0 <= ix < wid:
                                acc += w[co, ci, ky, kx] * x[ci, iy, ix]
                out[co, oy, ox] = acc
    return out


def bilinear_reference(img, cx, cy):
    """Border-clamped bilinear sampling oracle."""
    c, h, w = img.shape
    ho, wo = cx.shape
    out = np.zeros((c, ho, wo))
    for oy in range(ho):
        for ox in range(wo):
            fx = min(max(cx[oy, ox], 0.0), h - 1.0)
            fy = min(max(cy[oy, ox], 0.0), w - 1.0)
            x0 = int(math.floor(fx))
            y0 = int(math.floor(fy))
            x1 = min(x0 + 1, h - 1)
            y1 = min(y0 + 1, w - 1)
            ax, ay = fx - x0, fy - y0
            for ch in range(c):
                out[ch, oy, ox] = (img[ch, x0, y0] * (1 - ax) * (1 - ay)
                                   + img[ch, x1, y0] * ax * (1 - ay)
                                   + img[ch, x0, y1] * (1 - ax) * ay
                                   + img[ch, x1, y1] * ax * ay)
    return out


def ssim_reference(a, b, c1=0.01 ** 2, c2=0.03 ** 2):
    """Sliding 3x3 uniform-window SSIM, averaged over channels and windows."""
    cch, h, w = a.shape
    vals = []
    for c in range(cch):
        for i in range(h - 2):
            for j in range(w - 2):
                wa = a[c, i:i + 3, j:j + 3].astype(np.float64)
                wb = b[c, i:i + 3, j:j + 3].astype(np.float64)
                mua, mub = wa.mean(), wb.mean()
                va = (wa * wa).mean() - mua * mua
                vb = (wb * wb).mean() - mub * mub
                cov = (wa * wb).mean() - mua * mub
                num = (2 * mua * mub + c1) * (2 * cov + c2)
                den = (mua * mua + mub * mub + c1) * (va + vb + c2)
                vals.append(num / den)
    return float(np.mean(vals))


def quantile_reference(values, q):
    s = sorted(float(v) for v in np.asarray(values).ravel())
    pos = q * (len(s) - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, len(s) - 1)
    frac = pos - lo
    return s[lo] + (s[hi] - s[lo]) * frac


def fusion_reference(eps_list, d_list, strategy, n_prime=2, occlusion="quantile_median",
                     q=0.95, k=8):
    """Per-pixel loop implementation of masking, error maps, and fusion."""
    n = len(d_list)
    x_len, y_len = d_list[0].shape

    e_list = []
    for eps in eps_list:
        e = np.empty((x_len, y_len))
        if occlusion == "quantile_median":
            sigma = np.empty((x_len, y_len))
            for x in range(x_len):
                for y in range(y_len):
                    sigma[x, y] = np.std(eps[x, y, :])
            theta = quantile_reference(sigma, q)
            for x in range(x_len):
                for y in range(y_len):
                    if sigma[x, y] > theta:
                        e[x, y] = np.median(eps[x, y, :])
                    else:
                        e[x, y] = np.mean(eps[x, y, :])
        elif occlusion == "k_smallest":
            for x in range(x_len):
                for y in range(y_len):
                    e[x, y] = np.mean(np.sort(eps[x, y, :])[:k])
        elif occlusion == "none":
            for x in range(x_len):
                for y in range(y_len):
                    e[x, y] = np.mean(eps[x, y, :])
        else:
            raise ValueError(occlusion)
        e_list.append(e)

    out = np.empty((x_len, y_len))
    for x in range(x_len):
        for y in range(y_len):
            errs = [e_list[j][x, y] for j in range(n)]
            if strategy == "min_error":
                best = min(range(n), key=lambda j: (errs[j], j))
                out[x, y] = d_list[best][x, y]
            else:
                order = sorted(range(n), key=lambda j: (errs[j], j))[:n_prime]
                ws = np.exp(np.array([-errs[j] for j in order]))
                total = ws.sum()
                acc = 0.0
                for i, j in enumerate(order):
                    acc += (ws[i] / total) * d_list[j][x, y]
                out[x, y] = acc
    return out


def mse_reference(d, gt, border):
    acc = 0.0
    cnt = 0
    x_len, y_len = d.shape
    for x in range(border, x_len - border):
        for y in range(border, y_len - border):
            acc += (float(d[x, y]) - float(gt[x, y])) ** 2
            cnt += 1
    return 100.0 * acc / cnt


def bpr_reference(d, gt, threshold, border):
    bad = 0
    cnt = 0
    x_len, y_len = d.shape
    for x in range(border, x_len - border):
        for y in range(border, y_len - border):
            if abs(float(d[x, y]) - float(gt[x, y])) > threshold:
                bad += 1
            cnt += 1
    return 100.0 * bad / cnt

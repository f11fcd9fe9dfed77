"""Disparity evaluation metrics and the CSV report format."""

from __future__ import annotations

import csv

import numpy as np

DENSE_BPR_THRESHOLDS = (0.07, 0.03, 0.01)
SPARSE_BPR_THRESHOLDS = (0.3, 0.1, 0.05)


def _interior(d_hat, gt, border):
    d_hat = np.asarray(d_hat, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if d_hat.shape != gt.shape:
        raise ValueError(f"map shapes differ: {d_hat.shape} vs {gt.shape}")
    if border < 0:
        raise ValueError("border margin must be >= 0")
    x, y = d_hat.shape
    if 2 * border >= x or 2 * border >= y:
        raise ValueError(f"border margin {border} consumes the entire {x}x{y} map")
    if border:
        return d_hat[border:-border, border:-border], gt[border:-border, border:-border]
    return d_hat, gt


def metric_mse(d_hat, gt, border: int = 0) -> float:
    """Mean squared disparity error over the interior, times 100."""
    a, b = _interior(d_hat, gt, border)
    diff = a - b
    return 100.0 * float(np.mean(diff * diff))


def metric_bpr(d_hat, gt, threshold: float, border: int = 0) -> float:
    """Percentage of interior pixels whose absolute error exceeds the threshold."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    a, b = _interior(d_hat, gt, border)
    return 100.0 * float(np.mean(np.abs(a - b) > threshold))


def evaluate(d_hat, gt, thresholds=DENSE_BPR_THRESHOLDS, border: int = 0) -> dict:
    out = {"mse_x100": metric_mse(d_hat, gt, border)}
    for key, thr in zip(("bpr_a", "bpr_b", "bpr_c"), thresholds):
        out[key] = metric_bpr(d_hat, gt, thr, border)
    out["border_margin"] = border
    return out


REPORT_FIELDS = ("scene", "method", "mse_x100", "bpr_a", "bpr_b", "bpr_c", "border_margin")


def write_report(path, rows):
    """Write evaluation rows as ``scene,method,mse_x100,bpr_a,bpr_b,bpr_c,border_margin``."""
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=REPORT_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in REPORT_FIELDS})

"""Backend-dispatched numeric kernels (conv2d, conv3d, bilinear sampling)."""

from .. import backend
from . import numpy_impl

try:
    from . import numba_impl
except ImportError:  # pragma: no cover - numba missing
    numba_impl = None


def _impl():
    if backend.active() == "numba" and numba_impl is not None:
        return numba_impl
    return numpy_impl


def conv2d_forward(x, w, stride=1, dilation=1, padding=0):
    return _impl().conv2d_forward(x, w, stride, dilation, padding)


def conv2d_backward_input(gout, w, x_shape, stride=1, dilation=1, padding=0):
    cin, h, wid = x_shape
    return _impl().conv2d_backward_input(gout, w, cin, h, wid, stride, dilation, padding)


def conv2d_backward_weight(gout, x, w_shape, stride=1, dilation=1, padding=0):
    cout, cin, kh, kw = w_shape
    return _impl().conv2d_backward_weight(gout, x, cout, cin, kh, kw, stride, dilation, padding)


def conv3d_forward(x, w, stride=1, padding=0):
    return _impl().conv3d_forward(x, w, stride, padding)


def conv3d_backward_input(gout, w, x_shape, stride=1, padding=0):
    cin, d, h, wid = x_shape
    return _impl().conv3d_backward_input(gout, w, cin, d, h, wid, stride, padding)


def conv3d_backward_weight(gout, x, w_shape, stride=1, padding=0):
    cout, cin, kd, kh, kw = w_shape
    return _impl().conv3d_backward_weight(gout, x, cout, cin, kd, kh, kw, stride, padding)


def bilinear_forward(img, cx, cy):
    return _impl().bilinear_forward(img, cx, cy)


def bilinear_backward(img, cx, cy, gout):
    return _impl().bilinear_backward(img, cx, cy, gout)

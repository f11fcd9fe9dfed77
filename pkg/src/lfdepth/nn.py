"""Parameter storage, initialization, and conv-layer helpers for the networks."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, add, conv2d, conv3d, leaky_relu, reshape


class ParamBag:
    """Named learnable tensors of one network; the checkpointable unit."""

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self.tensors: dict[str, Tensor] = {}

    def add(self, name: str, array: np.ndarray) -> Tensor:
        if name in self.tensors:
            raise KeyError(f"parameter {name!r} already registered")
        t = Tensor(np.asarray(array, dtype=self.dtype), requires_grad=True)
        self.tensors[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def names(self):
        return sorted(self.tensors)

    def zero_grad(self):
        for t in self.tensors.values():
            t.grad = None

    def count(self) -> int:
        return sum(t.data.size for t in self.tensors.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: np.array(v.data, copy=True) for k, v in self.tensors.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        missing = set(self.tensors) - set(state)
        extra = set(state) - set(self.tensors)
        if missing or extra:
            raise KeyError(f"checkpoint mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for k, t in self.tensors.items():
            arr = np.asarray(state[k])
            if arr.shape != t.data.shape:
                raise ValueError(f"parameter {k!r}: checkpoint shape {arr.shape} != model {t.data.shape}")
            t.data = np.ascontiguousarray(arr, dtype=self.dtype)


def he_normal(rng, shape, fan_in, slope=0.1):
    std = np.sqrt(2.0 / ((1.0 + slope * slope) * fan_in))
    return rng.normal(0.0, std, size=shape)


def init_conv2d(bag: ParamBag, name: str, rng, cin: int, cout: int, k: int = 3, slope=0.1):
    bag.add(name + ".w", he_normal(rng, (cout, cin, k, k), cin * k * k, slope))
    bag.add(name + ".b", np.zeros(cout))


def init_conv3d(bag: ParamBag, name: str, rng, cin: int, cout: int, k: int = 3, slope=0.1):
    bag.add(name + ".w", he_normal(rng, (cout, cin, k, k, k), cin * k ** 3, slope))
    bag.add(name + ".b", np.zeros(cout))


def apply_conv2d(bag: ParamBag, name: str, x: Tensor, stride=1, dilation=1, padding=None) -> Tensor:
    w = bag[name + ".w"]
    b = bag[name + ".b"]
    if padding is None:
        padding = dilation * (w.data.shape[2] - 1) // 2  # same-size output at stride 1
    out = conv2d(x, w, stride=stride, dilation=dilation, padding=padding)
    return add(out, reshape(b, (b.data.shape[0], 1, 1)))


def apply_conv3d(bag: ParamBag, name: str, x: Tensor, stride=1, padding=None) -> Tensor:
    w = bag[name + ".w"]
    b = bag[name + ".b"]
    if padding is None:
        padding = (w.data.shape[2] - 1) // 2
    out = conv3d(x, w, stride=stride, padding=padding)
    return add(out, reshape(b, (b.data.shape[0], 1, 1, 1)))


def lrelu(x: Tensor, slope=0.1) -> Tensor:
    return leaky_relu(x, slope)

"""Self-describing weight container, magic ``LFDW1``.

Layout (all integers little-endian): the 5-byte magic, a u32 tensor count,
then per tensor a u16 name length + UTF-8 name, u8 ndim, u32 per dimension,
a u8 dtype code (0 = float32, 1 = float64), u64 payload size, and the raw
little-endian payload. Round-trips are bit-exact.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"LFDW1"

_DTYPE_CODES = {0: "<f4", 1: "<f8"}
_CODE_OF = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, tensors: dict):
    """Write name->array mappings; names carry namespaces like ``dispnet/``."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(tensors)))
        for name in sorted(tensors):
            arr = np.asarray(tensors[name])
            code = _CODE_OF.get(arr.dtype)
            if code is None:
                raise CheckpointError(f"tensor {name!r} has unsupported dtype {arr.dtype}")
            raw = np.ascontiguousarray(arr).astype(_DTYPE_CODES[code], copy=False).tobytes()
            enc = name.encode("utf-8")
            f.write(struct.pack("<H", len(enc)))
            f.write(enc)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(struct.pack("<B", code))
            f.write(struct.pack("<Q", len(raw)))
            f.write(raw)


def _read_exact(f, n, what):
    buf = f.read(n)
    if len(buf) != n:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return buf


def load_checkpoint(path) -> dict:
    out = {}
    with open(path, "rb") as f:
        if _read_exact(f, len(MAGIC), "magic") != MAGIC:
            raise CheckpointError(f"not an {MAGIC.decode()} checkpoint: {path}")
        (count,) = struct.unpack("<I", _read_exact(f, 4, "tensor count"))
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(f, 2, "name length"))
            name = _read_exact(f, name_len, "name").decode("utf-8")
            (ndim,) = struct.unpack("<B", _read_exact(f, 1, "ndim"))
            shape = struct.unpack(f"<{ndim}I", _read_exact(f, 4 * ndim, "shape"))
            (code,) = struct.unpack("<B", _read_exact(f, 1, "dtype"))
            if code not in _DTYPE_CODES:
                raise CheckpointError(f"tensor {name!r}: unknown dtype code {code}")
            (nbytes,) = struct.unpack("<Q", _read_exact(f, 8, "payload size"))
            raw = _read_exact(f, nbytes, f"payload of {name!r}")
            arr = np.frombuffer(raw, dtype=_DTYPE_CODES[code]).reshape(shape)
            out[name] = np.ascontiguousarray(arr)
    return out


def split_namespace(tensors: dict, namespace: str) -> dict:
    prefix = namespace.rstrip("/") + "/"
    return {k[len(prefix):]: v for k, v in tensors.items() if k.startswith(prefix)}


def join_namespaces(**named) -> dict:
    out = {}
    for ns, tensors in named.items():
        for k, v in tensors.items():
            out[f"{ns}/{k}"] = v
    return out

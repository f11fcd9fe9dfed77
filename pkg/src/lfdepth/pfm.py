"""Portable float map reader/writer.

Header: ``Pf`` (one channel) or ``PF`` (three channels), a dimension line
``width height``, and a scale line whose sign encodes endianness (negative
means little-endian). Rows are stored bottom-up. Written maps round-trip
bit-exactly.
"""

from __future__ import annotations

import numpy as np


class PfmError(ValueError):
    pass


def _read_token(f) -> bytes:
    tok = b""
    while True:
        c = f.read(1)
        if not c:
            raise PfmError("truncated PFM header")
        if c.isspace():
            if tok:
                return tok
            continue
        tok += c


def read_pfm(path, allow_nan: bool = False):
    """Read a PFM file; returns (X, Y) for ``Pf`` or (X, Y, 3) for ``PF``."""
    with open(path, "rb") as f:
        magic = _read_token(f)
        if magic == b"Pf":
            channels = 1
        elif magic == b"PF":
            channels = 3
        else:
            raise PfmError(f"malformed PFM header: magic {magic!r}")
        try:
            width = int(_read_token(f))
            height = int(_read_token(f))
            scale = float(_read_token(f))
        except ValueError as e:
            raise PfmError(f"malformed PFM header: {e}") from e
        if width <= 0 or height <= 0:
            raise PfmError(f"invalid PFM dimensions {width}x{height}")
        if scale == 0:
            raise PfmError("PFM scale must be nonzero")
        count = width * height * channels
        payload = f.read(count * 4)
        if len(payload) != count * 4:
            raise PfmError(f"truncated PFM payload: expected {count * 4} bytes, got {len(payload)}")
    dt = "<f4" if scale < 0 else ">f4"
    data = np.frombuffer(payload, dtype=dt).astype(np.float32)
    if not allow_nan and np.isnan(data).any():
        raise PfmError(f"PFM contains {int(np.isnan(data).sum())} NaN values")
    shape = (height, width) if channels == 1 else (height, width, channels)
    return np.ascontiguousarray(data.reshape(shape)[::-1])


def write_pfm(path, data, little_endian: bool = True):
    """Write an (X, Y) map as ``Pf`` or an (X, Y, 3) image as ``PF``."""
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim == 2:
        magic, height, width = b"Pf", arr.shape[0], arr.shape[1]
    elif arr.ndim == 3 and arr.shape[2] == 3:
        magic, height, width = b"PF", arr.shape[0], arr.shape[1]
    else:
        raise PfmError(f"PFM supports (X,Y) or (X,Y,3) data, got shape {arr.shape}")
    scale = -1.0 if little_endian else 1.0
    payload = np.ascontiguousarray(arr[::-1]).astype("<f4" if little_endian else ">f4")
    with open(path, "wb") as f:
        f.write(magic + b"\n")
        f.write(f"{width} {height}\n".encode())
        f.write(f"{scale:.1f}\n".encode())
        f.write(payload.tobytes())

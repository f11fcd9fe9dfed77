"""Numeric backend selection for the hot kernels.

The compute-heavy inner loops (2D/3D convolution, bilinear sampling) exist in
two interchangeable implementations: numba-jitted loops and a pure-numpy
fallback. ``LFDEPTH_BACKEND=numba|numpy`` selects one at import time; the
default is numba when it imports cleanly. ``LFDEPTH_THREADS`` caps the numba
worker count.
"""

from __future__ import annotations

import os
import warnings
from contextlib import contextmanager

VALID = ("numba", "numpy")


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _detect() -> str:
    forced = os.environ.get("LFDEPTH_BACKEND", "").strip().lower()
    if forced:
        if forced not in VALID:
            raise ValueError(
                f"LFDEPTH_BACKEND={forced!r} not recognized; expected one of {VALID}"
            )
        if forced == "numba" and not _numba_available():
            warnings.warn("LFDEPTH_BACKEND=numba requested but numba is not importable; "
                          "falling back to numpy")
            return "numpy"
        return forced
    return "numba" if _numba_available() else "numpy"


_active = _detect()


def active() -> str:
    """Name of the backend currently in use."""
    return _active


def set_backend(name: str) -> None:
    global _active
    if name not in VALID:
        raise ValueError(f"unknown backend {name!r}; expected one of {VALID}")
    if name == "numba" and not _numba_available():
        raise RuntimeError("numba backend requested but numba is not importable")
    _active = name


@contextmanager
def use(name: str):
    """Temporarily switch backends (used by tests and the kernel benchmark)."""
    prev = _active
    set_backend(name)
    try:
        yield
    finally:
        set_backend(prev)


def thread_cap() -> int | None:
    raw = os.environ.get("LFDEPTH_THREADS", "").strip()
    if not raw:
        return None
    n = int(raw)
    if n < 1:
        raise ValueError(f"LFDEPTH_THREADS must be >= 1, got {n}")
    return n


def configure_threads() -> None:
    """Apply LFDEPTH_THREADS to the numba thread pool, if applicable."""
    cap = thread_cap()
    if cap is None or not _numba_available():
        return
    import numba

    numba.set_num_threads(max(1, min(cap, numba.config.NUMBA_NUM_THREADS)))


configure_threads()

"""Backend selection for the numeric kernels.

``QUICWF_BACKEND=numpy`` forces the pure-numpy kernels; the default is numba
when it imports cleanly.
"""
from __future__ import annotations

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is optional
    numba = None

HAVE_NUMBA = numba is not None
BACKENDS = ("numba", "numpy") if HAVE_NUMBA else ("numpy",)


def default_backend() -> str:
    want = os.environ.get("QUICWF_BACKEND", "").strip().lower()
    if want == "numpy" or not HAVE_NUMBA:
        return "numpy"
    if want in ("", "numba"):
        return "numba"
    raise ValueError(f"QUICWF_BACKEND must be 'numba' or 'numpy', got {want!r}")


def resolve(backend: str | None) -> str:
    if backend is None:
        return default_backend()
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend


def njit(fn):
    if numba is None:  # pragma: no cover
        return fn
    return numba.njit(cache=True, nogil=True)(fn)

"""Selects the solver kernel backend.

`LOOPGATE_BACKEND=numba` (default when numba is importable) uses the jitted
per-edge kernels; `LOOPGATE_BACKEND=numpy` forces the vectorized numpy
fallback. Both expose the same functions and agree to floating-point noise;
`benchmarks/bench_backends.py` compares their throughput.
"""

from __future__ import annotations

import logging
import os

log = logging.getLogger(__name__)

_active = None
_active_name = ""


def _load(name: str):
    if name == "numpy":
        from loopgate import _kernels_numpy as mod

        return mod, "numpy"
    from loopgate import _kernels_numba as mod

    return mod, "numba"


def kernels():
    """Return the active kernel module, resolving the env flag on first use."""
    global _active, _active_name
    if _active is None:
        choice = os.environ.get("LOOPGATE_BACKEND", "auto").strip().lower()
        if choice not in ("auto", "numba", "numpy"):
            raise ValueError(f"LOOPGATE_BACKEND must be auto|numba|numpy, got {choice!r}")
        if choice == "numpy":
            _active, _active_name = _load("numpy")
        else:
            try:
                _active, _active_name = _load("numba")
            except ImportError:
                if choice == "numba":
                    raise
                log.warning("numba unavailable, falling back to numpy kernels")
                _active, _active_name = _load("numpy")
    return _active


def backend_name() -> str:
    kernels()
    return _active_name


def set_backend(name: str) -> None:
    """Force a backend (tests and benchmarks); name is 'numba' or 'numpy'."""
    global _active, _active_name
    _active, _active_name = _load(name)


def warmup() -> None:
    """Precompile jitted kernels so timed paths do not pay compile cost."""
    mod = kernels()
    if hasattr(mod, "warmup"):
        mod.warmup()

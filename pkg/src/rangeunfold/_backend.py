"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback. ``use_backend`` switches explicitly (tests and the benchmark
run both).
"""
from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_active = _compiled if _compiled is not None else _kernels_py


def available():
    return ["cython", "python"] if _compiled is not None else ["python"]


def kernels():
    return _active


def name():
    return _active.NAME


def use_backend(which):
    """Select "cython" or "python"; returns the previously active name."""
    global _active
    prev = _active.NAME
    if which == "python":
        _active = _kernels_py
    elif which == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        _active = _compiled
    else:
        raise ValueError(f"unknown backend {which!r}")
    return prev

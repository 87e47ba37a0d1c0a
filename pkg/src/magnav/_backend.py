"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
mirror. ``use_backend`` switches at runtime (tests and benchmarks compare
the two).
"""
import logging

from . import _pykernels

log = logging.getLogger(__name__)

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None
    log.debug("compiled kernels unavailable, using pure-Python fallback")

kernels = _compiled if _compiled is not None else _pykernels


def available_backends():
    names = ["python"]
    if _compiled is not None:
        names.insert(0, "compiled")
    return names


def current_backend():
    return "compiled" if kernels is _compiled and _compiled is not None else "python"


def use_backend(name):
    """Select ``"compiled"`` or ``"python"`` kernels for subsequent calls."""
    global kernels
    if name == "python":
        kernels = _pykernels
    elif name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels were not built")
        kernels = _compiled
    else:
        raise ValueError(f"unknown backend {name!r}")


def get_kernels():
    return kernels

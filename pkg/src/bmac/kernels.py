"""Kernel dispatch: compiled extension when available, Python otherwise.

Set the environment variable ``BMAC_PURE_PYTHON=1`` before import to force
the Python implementation.  :func:`use_backend` switches at run time.
"""

import os

from . import _kernels_py

__all__ = ["BACKEND", "available_backends", "use_backend", "get_backend",
           "power_iteration", "waterfill_rate", "waterfill_budget", "waterfill_weighted"]

_BACKENDS = {"python": _kernels_py}
try:  # pragma: no cover - depends on build
    from . import _core
    _BACKENDS["cython"] = _core
except ImportError:  # pragma: no cover
    _core = None

_NAMES = ("power_iteration", "waterfill_rate", "waterfill_budget", "waterfill_weighted")


def available_backends():
    """Names of the importable kernel backends."""
    return tuple(sorted(_BACKENDS))


def use_backend(name):
    """Route all kernel calls to backend ``name`` ('cython' or 'python')."""
    global BACKEND
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; choose from {available_backends()}")
    mod = _BACKENDS[name]
    g = globals()
    for fn in _NAMES:
        g[fn] = getattr(mod, fn)
    BACKEND = name


def get_backend():
    """Name of the active backend."""
    return BACKEND


BACKEND = "python"
if os.environ.get("BMAC_PURE_PYTHON", "") not in ("", "0") or "cython" not in _BACKENDS:
    use_backend("python")
else:
    use_backend("cython")


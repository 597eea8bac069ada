"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise (or when the
environment variable ``INSARCHAIN_PURE_PYTHON`` is set to a non-empty value)
the pure-Python implementations are used. Both produce identical results.
"""

import importlib
import os

from . import _pykernels


def load_backend(name):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "python":
        return _pykernels
    if name == "cython":
        return importlib.import_module("insarchain._ckernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends():
    names = ["python"]
    try:
        load_backend("cython")
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


if os.environ.get("INSARCHAIN_PURE_PYTHON"):
    BACKEND = "python"
else:
    BACKEND = available_backends()[0]

_impl = load_backend(BACKEND)
ssp_min_cost_flow = _impl.ssp_min_cost_flow
integrate_tree = _impl.integrate_tree

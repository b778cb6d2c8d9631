"""Select the kernel implementation at import time.

The compiled extension is preferred; set ``GMLEB_PURE_PYTHON=1`` to force the
numpy fallback.
"""
import importlib
import os

_NAMES = {"cython": "gmleb._ckernels", "numpy": "gmleb._pykernels"}


def load(name):
    """Return the kernel module for ``name`` ("cython" or "numpy")."""
    return importlib.import_module(_NAMES[name])


def available():
    out = []
    for name in _NAMES:
        try:
            load(name)
        except ImportError:
            continue
        out.append(name)
    return out


def _select():
    if os.environ.get("GMLEB_PURE_PYTHON", "").strip() not in ("", "0"):
        return "numpy", load("numpy")
    try:
        return "cython", load("cython")
    except ImportError:
        return "numpy", load("numpy")


BACKEND, kernels = _select()

"""Kernel backend selection.

The backward-induction layer update dominates solver runtime, so it exists
twice: a compiled Cython extension and a pure-numpy fallback with identical
semantics.  The compiled module is preferred when importable; set
``EHSCHED_BACKEND=numpy`` to force the fallback or ``EHSCHED_BACKEND=cython``
to fail loudly when the extension is missing.
"""

from __future__ import annotations

import os

from . import dp_numpy

_requested = os.environ.get("EHSCHED_BACKEND", "auto").lower()
_backend_name = "numpy"
layer_update = dp_numpy.layer_update

if _requested not in ("auto", "cython", "numpy", "python"):
    raise ValueError(f"EHSCHED_BACKEND must be auto|cython|numpy, got {_requested!r}")

if _requested in ("auto", "cython"):
    try:
        from . import _dp_cython

        layer_update = _dp_cython.layer_update
        _backend_name = "cython"
    except ImportError:
        if _requested == "cython":
            raise


def backend() -> str:
    """Name of the active kernel backend."""
    return _backend_name


def available_backends() -> dict:
    """All importable layer-update implementations, keyed by name."""
    out = {"numpy": dp_numpy.layer_update}
    try:
        from . import _dp_cython

        out["cython"] = _dp_cython.layer_update
    except ImportError:
        pass
    return out

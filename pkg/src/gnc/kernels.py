"""Elimination kernel backend, chosen once at import.

The compiled ``_ckernels`` extension is used when it was built; otherwise the
numpy implementations in ``_pykernels`` are used.  Setting ``GNC_PURE_PYTHON=1``
forces the fallback.
"""

import os

from . import _pykernels as python_backend

compiled_backend = None
if os.environ.get("GNC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend

BACKEND = _impl.BACKEND
mul_add = _impl.mul_add
scale = _impl.scale
echelon_reduce = _impl.echelon_reduce
back_substitute = _impl.back_substitute
replay = _impl.replay


def available_backends():
    out = {"python": python_backend}
    if compiled_backend is not None:
        out["cython"] = compiled_backend
    return out

"""Backend selection for the fixed-step integrator.

The compiled extension is preferred; the pure-NumPy implementation is the
drop-in fallback. ``CORP_LAB_BACKEND=python|cython`` forces a choice (used by
the benchmark and backend-agreement tests).
"""

import os

from corp_lab import _stepper_py

_forced = os.environ.get("CORP_LAB_BACKEND", "").strip().lower()

_impl = None
if _forced in ("", "cython"):
    try:
        from corp_lab import _stepper as _impl
    except ImportError:
        if _forced == "cython":
            raise
        _impl = None
if _impl is None:
    _impl = _stepper_py

BACKEND = _impl.BACKEND
rk4_collect = _impl.rk4_collect


def available_backends():
    """Name -> module for every importable backend."""
    backends = {"python": _stepper_py}
    try:
        from corp_lab import _stepper

        backends["cython"] = _stepper
    except ImportError:
        pass
    return backends

"""Kernel backend selection.

The compiled Cython extension is used when importable. Set
``IMUMATCH_BACKEND=python`` to force the pure-Python fallback.
"""
import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)

_BACKENDS = {"python": _pykernels}

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None
else:
    _BACKENDS["cython"] = _ckernels


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` (default: the active backend)."""
    if name is None:
        return ACTIVE
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable kernel backend {name!r}; "
                         f"available: {available_backends()}") from None


def _select():
    requested = os.environ.get("IMUMATCH_BACKEND", "").strip().lower()
    if requested:
        if requested not in _BACKENDS:
            log.warning("IMUMATCH_BACKEND=%s unavailable, using fallback", requested)
            return "python"
        return requested
    return "cython" if "cython" in _BACKENDS else "python"


BACKEND = _select()
ACTIVE = _BACKENDS[BACKEND]

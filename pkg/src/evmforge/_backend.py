"""Kernel backend selection.

The compiled Cython module is preferred. Set ``EVMFORGE_BACKEND=python`` to
force the numpy fallback, or call :func:`set_backend` at runtime.
"""
import contextlib
import logging
import os

from evmforge import _pykernels

try:
    from evmforge import _ckernels
except ImportError:  # extension not built
    _ckernels = None

log = logging.getLogger(__name__)

_AVAILABLE = {"python": _pykernels}
if _ckernels is not None:
    _AVAILABLE["cython"] = _ckernels


def available():
    return sorted(_AVAILABLE)


def _pick(name):
    if name is None or name == "auto":
        return _AVAILABLE.get("cython", _pykernels)
    try:
        return _AVAILABLE[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available; have {available()}") from None


kernels = _pick(os.environ.get("EVMFORGE_BACKEND"))
log.debug("using %s kernels", kernels.NAME)


def set_backend(name):
    global kernels
    kernels = _pick(name)
    return kernels.NAME


def backend_name():
    return kernels.NAME


@contextlib.contextmanager
def use_backend(name):
    global kernels
    prev = kernels
    kernels = _pick(name)
    try:
        yield kernels
    finally:
        kernels = prev

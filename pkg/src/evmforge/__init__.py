"""Eulerian video magnification and inter-frame forensic features."""

__version__ = "0.1.0"

from evmforge._backend import available as available_backends  # noqa: E402
from evmforge._backend import backend_name, set_backend, use_backend  # noqa: E402

__all__ = ["__version__", "available_backends", "backend_name", "set_backend", "use_backend"]

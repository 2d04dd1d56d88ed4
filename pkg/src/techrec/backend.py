"""Kernel backend selection.

Two interchangeable implementations of the training epoch kernels exist:
a compiled one (numba) and a plain-numpy reference. The environment
variable TECHREC_BACKEND picks one:

    auto    compiled when numba imports, reference otherwise (default)
    numba   compiled, error if numba is unavailable
    numpy   reference

The variable is read at training time, so tests can flip it per call.
"""

from __future__ import annotations

import os

from .errors import UsageError

ENV_VAR = "TECHREC_BACKEND"
_CHOICES = ("auto", "numba", "numpy")


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def resolve_backend(name: str | None = None) -> str:
    """Return "numba" or "numpy" for an explicit name or the environment."""
    name = name or os.environ.get(ENV_VAR, "auto")
    if name not in _CHOICES:
        raise UsageError(f"{ENV_VAR} must be one of {', '.join(_CHOICES)}; got {name!r}")
    if name == "numpy":
        return "numpy"
    if name == "numba":
        if not _numba_available():
            raise UsageError(f"{ENV_VAR}=numba but numba is not importable")
        return "numba"
    return "numba" if _numba_available() else "numpy"


def load_kernels(name: str | None = None):
    """Resolve the backend and import its kernel module.

    Returns (backend name, module); the module exposes hinge_epoch_dot and
    hinge_epoch_mlp with identical signatures in both backends.
    """
    backend = resolve_backend(name)
    if backend == "numba":
        from . import kernels_numba as kernels
    else:
        from . import kernels_numpy as kernels
    return backend, kernels

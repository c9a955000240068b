"""Kernel backend selection.

Hot inner loops exist twice: as numba ``@njit`` kernels and as vectorized
pure-numpy fallbacks. The active implementation is chosen once, at import
time, from the environment variable ``PIXELCLUSTER_BACKEND``:

    auto   -- numba when importable, numpy otherwise (default)
    numba  -- require numba, fail if it cannot be imported
    numpy  -- force the pure-numpy path

``python -m pixelcluster.bench`` times both paths side by side.
"""

import os

from .errors import ConfigError

ENV_VAR = "PIXELCLUSTER_BACKEND"


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def resolve_backend(name: str | None = None) -> str:
    """Return 'numba' or 'numpy' for a requested backend name."""
    if name is None:
        name = os.environ.get(ENV_VAR, "auto")
    name = name.strip().lower()
    if name not in ("auto", "numba", "numpy"):
        raise ConfigError(
            f"{ENV_VAR}={name!r} is not a valid backend (use auto, numba or numpy)"
        )
    if name == "numpy":
        return "numpy"
    if _numba_available():
        return "numba"
    if name == "numba":
        raise ConfigError(f"{ENV_VAR}=numba but numba is not importable")
    return "numpy"


ACTIVE = resolve_backend()

"""Backend selection for the hot numeric kernels.

Set ``IQSIG_BACKEND=numpy`` to force the pure-numpy fallback path,
``IQSIG_BACKEND=numba`` to require the jitted path (import error if numba
is missing). The default, ``auto``, uses numba whenever it is importable.
"""

import os

ENV_VAR = "IQSIG_BACKEND"


def _resolve() -> tuple[str, bool]:
    choice = os.environ.get(ENV_VAR, "auto").strip().lower() or "auto"
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(
            f"{ENV_VAR} must be one of auto/numba/numpy, got {choice!r}"
        )
    try:
        import numba  # noqa: F401

        available = True
    except ImportError:
        available = False
    if choice == "numba" and not available:
        raise ImportError(f"{ENV_VAR}=numba requested but numba is not importable")
    backend = "numpy" if (choice == "numpy" or not available) else "numba"
    return backend, available


BACKEND, NUMBA_AVAILABLE = _resolve()

"""Backend selection for the numerical kernels.

DRIFT_DETECT_BACKEND picks the implementation:

    auto   (default) JIT kernels when numba imports, else pure numpy
    numba  force JIT kernels (warns and falls back if numba is missing)
    numpy  force the vectorized numpy kernels

Both backends implement the same operations; integer RNG kernels agree bit
for bit, floating-point kernels to roughly 1e-12 relative (libm differences).
"""

from __future__ import annotations

import os
import warnings

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

_choice = os.environ.get("DRIFT_DETECT_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    warnings.warn(
        f"unknown DRIFT_DETECT_BACKEND={_choice!r}, using 'auto'", stacklevel=1
    )
    _choice = "auto"
if _choice == "numba" and not HAVE_NUMBA:
    warnings.warn("DRIFT_DETECT_BACKEND=numba but numba is not importable; "
                  "falling back to numpy kernels", stacklevel=1)

USE_NUMBA = HAVE_NUMBA if _choice == "auto" else (_choice == "numba" and HAVE_NUMBA)
BACKEND = "numba" if USE_NUMBA else "numpy"


def set_threads(n: int | None) -> int:
    """Cap kernel worker threads; returns the count actually in effect."""
    if n is None:
        env = os.environ.get("DRIFT_DETECT_THREADS")
        n = int(env) if env else 0
    if USE_NUMBA and n and n > 0:
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
        return numba.get_num_threads()
    if USE_NUMBA:
        import numba

        return numba.get_num_threads()
    return 1

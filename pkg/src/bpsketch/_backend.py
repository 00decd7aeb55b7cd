"""Kernel backend selection: numba JIT by default, pure Python on request.

Every hot kernel in this package is written once, in a numba-compatible
subset of Python, and decorated with :func:`kernel`.  When numba is
available (and not disabled) the kernels are compiled with ``@njit``;
otherwise they run as plain Python functions over numpy arrays.  Both
paths compute bit-identical results: all integer arithmetic is designed
to stay inside signed 64-bit range, so CPython's big ints and numba's
int64 agree exactly.

Set the environment variable ``BPSKETCH_BACKEND=python`` before import
to force the interpreted fallback (used by the backend parity tests and
``benchmarks/backend_bench.py``).  Any other value, or leaving it unset,
selects numba when importable.
"""

import os

_requested = os.environ.get("BPSKETCH_BACKEND", "").strip().lower()

if _requested in ("python", "numpy", "off", "0", "false"):
    NUMBA_ENABLED = False
    _njit = None
else:
    try:
        from numba import njit as _njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - exercised only without numba
        if _requested == "numba":
            raise
        NUMBA_ENABLED = False
        _njit = None

BACKEND = "numba" if NUMBA_ENABLED else "python"

# fastmath stays off: float results must match between backends.
_KERNEL_OPTS = {"cache": True, "nogil": True}


def kernel(func):
    """JIT-compile ``func`` under the numba backend, pass through otherwise."""
    if NUMBA_ENABLED:
        return _njit(**_KERNEL_OPTS)(func)
    return func

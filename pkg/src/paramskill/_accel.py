"""Optional numba acceleration.

Set ``PARAMSKILL_DISABLE_NUMBA=1`` before import to run every kernel as plain
Python/numpy. Both paths execute the same source, so results agree up to
floating-point differences in libm.
"""

import os

_DISABLED = os.environ.get("PARAMSKILL_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _DISABLED:
        raise ImportError
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:
    NUMBA_ENABLED = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator


def backend_name():
    return "numba" if NUMBA_ENABLED else "numpy"

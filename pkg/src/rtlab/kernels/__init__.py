"""Hot inner loops of the time steppers.

Each kernel has a numba ``@njit`` implementation and a vectorized numpy
fallback with identical semantics.  Set ``RTLAB_NUMBA=0`` in the
environment (before import) to force the numpy path.
"""

import os

from . import numpy_impl

USE_NUMBA = os.environ.get("RTLAB_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")

if USE_NUMBA:
    try:
        from . import numba_impl as _impl
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False
        _impl = numpy_impl
else:
    _impl = numpy_impl

advect_velocity = _impl.advect_velocity
muscl_fluxes = _impl.muscl_fluxes

BACKEND = "numba" if USE_NUMBA else "numpy"

__all__ = ["advect_velocity", "muscl_fluxes", "BACKEND", "USE_NUMBA", "numpy_impl"]

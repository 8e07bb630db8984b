"""Kernel backend selection: numba-jitted loops with a pure-numpy fallback.

Every hot Monte Carlo kernel in this package exists in two forms that consume
the same pre-drawn uniform matrix in the same order and therefore produce
bit-identical counters:

* a scalar loop, compiled with ``numba.njit(cache=True)`` (default), and
* a vectorized numpy implementation.

The active path is chosen by the ``FAKEDSTATES_BACKEND`` environment variable
(``numba`` or ``numpy``), read at call time so tests can flip it. If numba is
not importable the numpy path is used regardless.
"""

from __future__ import annotations

import os

BACKEND_ENV_VAR = "FAKEDSTATES_BACKEND"

try:
    from numba import njit as _njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a hard dependency, but stay usable
    _njit = None
    NUMBA_AVAILABLE = False

_compiled = {}


def active_backend() -> str:
    """Return the backend name currently in effect (``"numba"`` or ``"numpy"``)."""
    value = os.environ.get(BACKEND_ENV_VAR, "").strip().lower()
    if value == "numpy":
        return "numpy"
    if value == "numba":
        if not NUMBA_AVAILABLE:
            raise RuntimeError(
                f"{BACKEND_ENV_VAR}=numba requested but numba is not importable"
            )
        return "numba"
    if value:
        raise RuntimeError(
            f"unrecognized {BACKEND_ENV_VAR}={value!r}; expected 'numba' or 'numpy'"
        )
    return "numba" if NUMBA_AVAILABLE else "numpy"


def _jitted(loop_impl):
    fn = _compiled.get(loop_impl)
    if fn is None:
        fn = _njit(cache=True)(loop_impl)
        _compiled[loop_impl] = fn
    return fn


def dispatch(numpy_impl, loop_impl):
    """Wrap a (vectorized, loop) implementation pair behind the env switch.

    Both implementations must accept identical arguments and return identical
    values for identical inputs; the loop form must stay inside the numba
    nopython subset.
    """

    def run(*args):
        if active_backend() == "numba":
            return _jitted(loop_impl)(*args)
        return numpy_impl(*args)

    run.numpy_impl = numpy_impl
    run.loop_impl = loop_impl
    return run

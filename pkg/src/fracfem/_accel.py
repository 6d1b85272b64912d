"""Optional numba acceleration.

Set ``FRACFEM_NUMBA=0`` to force the pure-numpy kernels. Thread count for the
compiled kernels comes from ``FRACFEM_NUM_THREADS``.
"""
import os

# the TBB layer shipped in the base image is too old for numba
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False


def numba_enabled():
    flag = os.environ.get("FRACFEM_NUMBA", "1").strip().lower()
    return HAVE_NUMBA and flag not in ("0", "false", "no", "off")


def set_num_threads(n=None):
    """Apply the thread count from the argument or ``FRACFEM_NUM_THREADS``."""
    if n is None:
        raw = os.environ.get("FRACFEM_NUM_THREADS")
        if not raw:
            return None
        n = int(raw)
    if n < 1:
        raise ValueError("thread count must be positive")
    if HAVE_NUMBA:
        n = min(n, numba.config.NUMBA_NUM_THREADS)
        numba.set_num_threads(n)
    return n


if HAVE_NUMBA:
    njit = numba.njit
    prange = numba.prange
else:  # pragma: no cover

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f

    prange = range

"""Backend selection for the numeric kernels.

Set ``ANDOVA_DISABLE_NUMBA=1`` to force the pure-numpy path.  Numba is
also skipped when it cannot be imported.
"""

import os

_FALSY = {"", "0", "false", "no", "off"}

# prefer OpenMP over TBB; old TBB builds warn on every first parallel launch
os.environ.setdefault("NUMBA_THREADING_LAYER_PRIORITY", "omp workqueue tbb")


def numba_requested() -> bool:
    return os.environ.get("ANDOVA_DISABLE_NUMBA", "").strip().lower() in _FALSY


try:  # pragma: no cover - import guard
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and numba_requested()


def set_threads(n: int | None) -> int:
    """Size the kernel thread pool; returns the count in effect."""
    if n is None:
        env = os.environ.get("ANDOVA_THREADS")
        n = int(env) if env else None
    if not HAVE_NUMBA:
        return 1
    import numba

    if n is None:
        return numba.get_num_threads()
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n

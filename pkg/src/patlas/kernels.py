"""Kernel backend selection.

The compiled extension (``patlas._kernels``) is preferred; the pure-Python
backend (``patlas._kernels_py``) is used when the extension is unavailable.
Set ``PATLAS_BACKEND=py`` or ``PATLAS_BACKEND=c`` to force one. Both backends
produce identical results; only speed differs.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import ConfigError

_requested = os.environ.get("PATLAS_BACKEND", "").strip().lower()

if _requested in ("", "c", "native"):
    try:
        from . import _kernels as _impl
    except ImportError:
        if _requested:
            raise ConfigError("PATLAS_BACKEND=c but the compiled extension is not installed")
        from . import _kernels_py as _impl
elif _requested in ("py", "python"):
    from . import _kernels_py as _impl
else:
    raise ConfigError(f"unknown PATLAS_BACKEND value: {_requested!r}")

BACKEND: str = _impl.BACKEND

prepare_name = _impl.prepare_name
score_one = _impl.score_one
score_pairs = _impl.score_pairs
levenshtein = _impl.levenshtein
assign_sweep = _impl.assign_sweep
member_contrib = _impl.member_contrib
inblock_count = _impl.inblock_count


def thread_count() -> int:
    """Worker cap from PATLAS_THREADS (default: cpu count, at least 1)."""
    raw = os.environ.get("PATLAS_THREADS", "").strip()
    if raw:
        try:
            value = int(raw)
        except ValueError as exc:
            raise ConfigError(f"PATLAS_THREADS must be an integer, got {raw!r}") from exc
        return max(1, value)
    return max(1, os.cpu_count() or 1)


def score_pairs_threaded(prepared: list, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """score_pairs, chunked over a thread pool when the backend releases the GIL.

    Output is written per pair position, so the result does not depend on the
    thread count.
    """
    n = len(left)
    workers = thread_count() if BACKEND == "c" else 1
    if workers <= 1 or n < 4096:
        return score_pairs(prepared, left, right)
    out = np.empty(n, dtype=np.float64)
    bounds = np.linspace(0, n, workers + 1, dtype=np.int64)

    def run(lo: int, hi: int) -> None:
        out[lo:hi] = score_pairs(prepared, left[lo:hi], right[lo:hi])

    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run, int(bounds[w]), int(bounds[w + 1])) for w in range(workers)]
        for f in futures:
            f.result()
    return out

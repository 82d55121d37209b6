"""Hot numeric kernels: cosine scoring of a gallery matrix against one query.

Two interchangeable implementations exist:

* a numba ``@njit`` kernel (default when numba imports cleanly), and
* a pure-numpy fallback.

Setting the environment variable ``PDV_NO_NUMBA`` to a non-empty value other
than ``0`` forces the numpy path; the flag is read once at import time.
Both paths accumulate each row's dot product in float64 and are independent
per row, so scores never depend on gallery size or candidate order.
``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

_CHUNK_ROWS = 16384


def cosine_scores_numpy(matrix: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Dot each float32 row of ``matrix`` with a float64 ``query``.

    Rows are promoted to float64 in chunks so large galleries do not
    materialise a full double-precision copy.
    """
    n = matrix.shape[0]
    out = np.empty(n, dtype=np.float64)
    for start in range(0, n, _CHUNK_ROWS):
        stop = min(start + _CHUNK_ROWS, n)
        out[start:stop] = matrix[start:stop].astype(np.float64) @ query
    return out


def _numba_disabled() -> bool:
    return os.environ.get("PDV_NO_NUMBA", "") not in ("", "0")


if not _numba_disabled():
    try:
        from numba import njit

        @njit(cache=True)
        def cosine_scores_numba(matrix, query):
            n, d = matrix.shape
            out = np.empty(n, dtype=np.float64)
            for i in range(n):
                acc = 0.0
                for j in range(d):
                    acc += np.float64(matrix[i, j]) * query[j]
                out[i] = acc
            return out

        cosine_scores = cosine_scores_numba
        BACKEND = "numba"
    except ImportError:  # pragma: no cover - exercised only without numba
        cosine_scores_numba = None
        cosine_scores = cosine_scores_numpy
        BACKEND = "numpy"
else:
    cosine_scores_numba = None
    cosine_scores = cosine_scores_numpy
    BACKEND = "numpy"

from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest

from pdvret import kernels


def test_numpy_matches_manual_loop(rng):
    m = rng.standard_normal((37, 9)).astype(np.float32)
    q = rng.standard_normal(9)
    expected = np.array(
        [sum(float(m[i, j]) * q[j] for j in range(9)) for i in range(37)]
    )
    np.testing.assert_allclose(kernels.cosine_scores_numpy(m, q), expected, rtol=1e-12)


def test_numpy_chunking_boundary(rng):
    n = kernels._CHUNK_ROWS + 3
    m = rng.standard_normal((n, 4)).astype(np.float32)
    q = rng.standard_normal(4)
    out = kernels.cosine_scores_numpy(m, q)
    np.testing.assert_allclose(out, m.astype(np.float64) @ q, rtol=1e-13)


@pytest.mark.skipif(kernels.cosine_scores_numba is None, reason="numba unavailable")
def test_backends_agree(rng):
    for _ in range(10):
        n = int(rng.integers(1, 400))
        d = int(rng.integers(1, 130))
        m = rng.standard_normal((n, d)).astype(np.float32)
        q = rng.standard_normal(d)
        a = kernels.cosine_scores_numba(m, q)
        b = kernels.cosine_scores_numpy(m, q)
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, PDV_NO_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", "from pdvret import kernels; print(kernels.BACKEND)"],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "numpy"


def test_default_backend_is_numba_when_importable():
    env = {k: v for k, v in os.environ.items() if k != "PDV_NO_NUMBA"}
    out = subprocess.run(
        [sys.executable, "-c", "from pdvret import kernels; print(kernels.BACKEND)"],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "numba"

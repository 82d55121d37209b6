from __future__ import annotations

import numpy as np
import pytest

from pdvret.core import QueryBundle
from pdvret.retrieval import Gallery, build_gallery


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_unit(rng, dim, dtype=np.float32):
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    return v.astype(dtype)


def make_bundle(rng, dim, query_id="q", **kwargs) -> QueryBundle:
    return QueryBundle(
        query_id=query_id,
        ref_text=random_unit(rng, dim),
        composed_text=random_unit(rng, dim),
        ref_image=random_unit(rng, dim),
        **kwargs,
    )


def make_gallery(rng, n, dim, prefix="g") -> Gallery:
    return build_gallery(
        (f"{prefix}{i:04d}", rng.standard_normal(dim).astype(np.float32))
        for i in range(n)
    )


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Trigger the jit compile once so timed tests measure the algorithm."""
    from pdvret import kernels

    m = np.ones((2, 3), dtype=np.float32)
    q = np.ones(3, dtype=np.float64)
    kernels.cosine_scores(m, q)

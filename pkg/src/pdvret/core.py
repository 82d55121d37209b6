"""Prompt-directional-vector arithmetic.

The composed query is synthesised from three embeddings of one query: the
unprompted reference text embedding, the prompt-composed text embedding, and
the reference image embedding. The prompt directional vector (PDV) is the
residual ``composed_text - ref_text`` after normalising both; scaled copies
of it shift the text and image embeddings, and a convex fusion of the two
shifted vectors, normalised once at the end, is the query.

Precision convention: embeddings are stored as float32; norms and dot
products accumulate in float64. The residual is deliberately left
un-normalised (its magnitude carries how descriptive the prompt was) and
intermediate composed vectors stay raw; only the final fusion is normalised.

All functions are pure and never mutate their inputs; arrays handed out are
marked read-only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateQuery,
    DimensionMismatch,
    InvalidEmbedding,
    InvalidParameter,
    SchemaViolation,
)

ZERO_NORM_EPS = 1e-12

# advisory steering ranges; the library itself accepts any finite value,
# only the service/UI clamp to these
ALPHA_T_RANGE = (-0.5, 3.0)
ALPHA_I_RANGE = (-0.5, 2.0)
BETA_RANGE = (0.0, 1.0)


def as_embedding(values, *, name: str = "embedding") -> np.ndarray:
    """Coerce to a 1-D float32 vector, rejecting NaN/Inf."""
    v = np.asarray(values, dtype=np.float32)
    if v.ndim != 1:
        v = v.reshape(-1)
    if v.size == 0:
        raise InvalidEmbedding(f"{name} is empty")
    if not np.isfinite(v).all():
        raise InvalidEmbedding(f"{name} contains non-finite values")
    return v


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(f"dim {a.shape[0]} vs {b.shape[0]}")


def norm64(v: np.ndarray) -> float:
    """Euclidean norm with float64 accumulation."""
    return float(np.linalg.norm(v.astype(np.float64)))


def normalize(v) -> np.ndarray:
    """Scale ``v`` to unit length; a vector of norm <= 1e-12 passes through.

    The zero pass-through exists because an empty prompt legitimately
    produces a zero residual; zero vectors are never acceptable as gallery
    rows or query bases, which is enforced where those are built.
    """
    v = as_embedding(values=v)
    n = norm64(v)
    if n <= ZERO_NORM_EPS:
        return v.copy()
    return v / n


def compute_pdv(ref_text: np.ndarray, composed_text: np.ndarray) -> np.ndarray:
    """Residual ``composed_text - ref_text``; both inputs already normalised.

    Not re-normalised: the residual magnitude is meaningful (shorter
    residuals come from less descriptive prompts).
    """
    _check_same_dim(ref_text, composed_text)
    return composed_text - ref_text


def compose_text(ref_text: np.ndarray, pdv: np.ndarray, alpha_t: float) -> np.ndarray:
    """``ref_text + alpha_t * pdv``, left un-normalised."""
    _check_same_dim(ref_text, pdv)
    return ref_text + float(alpha_t) * pdv


def compose_image(ref_image: np.ndarray, pdv: np.ndarray, alpha_i: float) -> np.ndarray:
    """``ref_image + alpha_i * pdv``, left un-normalised."""
    _check_same_dim(ref_image, pdv)
    return ref_image + float(alpha_i) * pdv


def fuse(pdv_i: np.ndarray, pdv_t: np.ndarray, beta: float) -> np.ndarray:
    """Convex combination ``(1-beta)*pdv_i + beta*pdv_t``, un-normalised.

    The endpoints are returned verbatim so beta=0 / beta=1 reduce exactly
    to the single-modality vectors.
    """
    beta = float(beta)
    if not np.isfinite(beta) or not (0.0 <= beta <= 1.0):
        raise InvalidParameter(f"beta must be in [0, 1], got {beta}")
    _check_same_dim(pdv_i, pdv_t)
    if beta == 1.0:
        return pdv_t.copy()
    if beta == 0.0:
        return pdv_i.copy()
    return (1.0 - beta) * pdv_i + beta * pdv_t


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PDVParams:
    """User-steerable triple: text scale, image scale, fusion weight."""

    alpha_t: float = 1.0
    alpha_i: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        for name in ("alpha_t", "alpha_i", "beta"):
            val = float(getattr(self, name))
            if not np.isfinite(val):
                raise InvalidParameter(f"{name} must be finite")
            object.__setattr__(self, name, val)
        if not (0.0 <= self.beta <= 1.0):
            raise InvalidParameter(f"beta must be in [0, 1], got {self.beta}")

    def clamped(self) -> "PDVParams":
        """Clip to the advisory steering ranges (service/UI edge only)."""
        return PDVParams(
            alpha_t=min(max(self.alpha_t, ALPHA_T_RANGE[0]), ALPHA_T_RANGE[1]),
            alpha_i=min(max(self.alpha_i, ALPHA_I_RANGE[0]), ALPHA_I_RANGE[1]),
            beta=min(max(self.beta, BETA_RANGE[0]), BETA_RANGE[1]),
        )

    def to_dict(self) -> dict:
        return {"alpha_t": self.alpha_t, "alpha_i": self.alpha_i, "beta": self.beta}


@dataclass(frozen=True)
class QueryBundle:
    """The three embeddings of one query plus target metadata.

    ``ref_text`` is the unprompted baseline text embedding, ``composed_text``
    the prompt-composed one, ``ref_image`` the reference image embedding.
    All three must share one dimension and be non-zero; they are stored raw
    (normalisation happens inside the query synthesis).
    """

    query_id: str
    ref_text: np.ndarray
    composed_text: np.ndarray
    ref_image: np.ndarray
    target_ids: frozenset = frozenset()
    subset_ids: tuple | None = None
    prompt_text: str | None = None
    image_url: str | None = None
    group: str | None = None
    target_embedding: np.ndarray | None = None

    def __post_init__(self):
        for name in ("ref_text", "composed_text", "ref_image"):
            v = as_embedding(getattr(self, name), name=f"{self.query_id}.{name}")
            if norm64(v) <= ZERO_NORM_EPS:
                raise InvalidEmbedding(f"{self.query_id}.{name} is a zero vector")
            object.__setattr__(self, name, _frozen(v))
        _check_same_dim(self.ref_text, self.composed_text)
        _check_same_dim(self.ref_text, self.ref_image)
        object.__setattr__(self, "target_ids", frozenset(self.target_ids))
        if self.subset_ids is not None:
            subset = tuple(self.subset_ids)
            missing = self.target_ids - set(subset)
            if missing:
                raise SchemaViolation(
                    f"{self.query_id}: subset_ids missing targets {sorted(missing)}"
                )
            object.__setattr__(self, "subset_ids", subset)
        if self.target_embedding is not None:
            t = as_embedding(self.target_embedding, name=f"{self.query_id}.target")
            _check_same_dim(self.ref_text, t)
            object.__setattr__(self, "target_embedding", _frozen(t))

    @property
    def dim(self) -> int:
        return int(self.ref_text.shape[0])


@dataclass(frozen=True)
class QueryCache:
    """Normalised bundle embeddings plus the residual, computed once.

    Sessions hold one of these so parameter re-tries are pure vector
    arithmetic: no file reads, no re-normalisation of source embeddings.
    """

    ref_text: np.ndarray
    composed_text: np.ndarray
    ref_image: np.ndarray
    pdv: np.ndarray

    @classmethod
    def from_bundle(cls, bundle: QueryBundle) -> "QueryCache":
        ref_text = normalize(bundle.ref_text)
        composed_text = normalize(bundle.composed_text)
        ref_image = normalize(bundle.ref_image)
        pdv = compute_pdv(ref_text, composed_text)
        return cls(
            ref_text=_frozen(ref_text),
            composed_text=_frozen(composed_text),
            ref_image=_frozen(ref_image),
            pdv=_frozen(pdv),
        )


def compose_from_cache(cache: QueryCache, params: PDVParams) -> np.ndarray:
    """Synthesise the unit query embedding from cached normalised parts.

    The two single-modality parameter settings short-circuit to their
    algebraic values so the reductions hold bit-for-bit:
    (alpha_t=1, beta=1) returns the normalised composed text embedding and
    (alpha_i=0, beta=0) the normalised reference image embedding.
    """
    alpha_t, alpha_i, beta = params.alpha_t, params.alpha_i, params.beta
    if beta == 1.0 and alpha_t == 1.0:
        return cache.composed_text
    if beta == 0.0 and alpha_i == 0.0:
        return cache.ref_image

    if beta == 1.0:
        fused = compose_text(cache.ref_text, cache.pdv, alpha_t)
    elif beta == 0.0:
        fused = compose_image(cache.ref_image, cache.pdv, alpha_i)
    else:
        phi_t = (
            cache.composed_text
            if alpha_t == 1.0
            else compose_text(cache.ref_text, cache.pdv, alpha_t)
        )
        phi_i = (
            cache.ref_image
            if alpha_i == 0.0
            else compose_image(cache.ref_image, cache.pdv, alpha_i)
        )
        fused = (1.0 - beta) * phi_i + beta * phi_t

    if norm64(fused) <= ZERO_NORM_EPS:
        raise DegenerateQuery(
            f"composition cancelled to zero (alpha_t={alpha_t}, "
            f"alpha_i={alpha_i}, beta={beta})"
        )
    return _frozen(normalize(fused))


def compute_query_embedding(bundle: QueryBundle, params: PDVParams) -> np.ndarray:
    """Full pipeline: normalise inputs, take the residual, compose, fuse,
    normalise once. Raises DegenerateQuery if the composition cancels."""
    return compose_from_cache(QueryCache.from_bundle(bundle), params)

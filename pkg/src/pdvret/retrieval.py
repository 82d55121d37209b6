"""Gallery storage and exact cosine ranking.

Ranking is a brute-force scan (no approximate index): candidate galleries in
this domain are small enough (1e4-1e5 rows) that an exact scan keeps results
bit-reproducible. Scores are float64 per-row dot products against the unit
query; ties are broken by ascending id so equal inputs always yield
byte-equal rankings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import PDVParams, QueryBundle, QueryCache, compose_from_cache, norm64
from .errors import (
    DimensionMismatch,
    DuplicateId,
    EmptyGallery,
    InvalidEmbedding,
    InvalidParameter,
    SubsetNotInGallery,
    ZeroQuery,
)

ROW_NORM_TOL = 1e-4

FILTER_DROP_DISTANCE = "drop_if_distance_above"
FILTER_KEEP_SIMILARITY = "keep_if_similarity_at_least"


class Gallery:
    """Immutable id-indexed matrix of unit-normalised candidate embeddings."""

    def __init__(self, ids, matrix):
        ids = tuple(str(i) for i in ids)
        matrix = np.ascontiguousarray(matrix, dtype=np.float32)
        if len(ids) == 0:
            raise EmptyGallery("gallery has no rows")
        if matrix.ndim != 2 or matrix.shape[0] != len(ids):
            raise DimensionMismatch(
                f"matrix shape {matrix.shape} does not match {len(ids)} ids"
            )
        if len(set(ids)) != len(ids):
            seen = set()
            for gid in ids:
                if gid in seen:
                    raise DuplicateId(f"duplicate gallery id {gid!r}")
                seen.add(gid)
        if not np.isfinite(matrix).all():
            raise InvalidEmbedding("gallery matrix contains non-finite values")
        norms = np.linalg.norm(matrix.astype(np.float64), axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > ROW_NORM_TOL)
        if bad.size:
            raise InvalidEmbedding(
                f"gallery row {ids[bad[0]]!r} has norm {norms[bad[0]]:.6f}, "
                f"expected 1 within {ROW_NORM_TOL}"
            )
        matrix.flags.writeable = False
        self.ids = ids
        self.matrix = matrix
        self._index = {gid: i for i, gid in enumerate(ids)}

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, gid) -> bool:
        return gid in self._index

    def index_of(self, gid: str) -> int:
        return self._index[gid]


def build_gallery(records) -> Gallery:
    """Normalise and index ``(id, vector)`` records, preserving order."""
    ids = []
    rows = []
    seen = set()
    dim = None
    for gid, vec in records:
        gid = str(gid)
        if gid in seen:
            raise DuplicateId(f"duplicate gallery id {gid!r}")
        seen.add(gid)
        v = np.asarray(vec, dtype=np.float32).reshape(-1)
        if not np.isfinite(v).all():
            raise InvalidEmbedding(f"gallery item {gid!r} has non-finite values")
        if dim is None:
            dim = v.shape[0]
        elif v.shape[0] != dim:
            raise DimensionMismatch(
                f"gallery item {gid!r} has dim {v.shape[0]}, expected {dim}"
            )
        n = norm64(v)
        if n <= 1e-12:
            raise InvalidEmbedding(f"gallery item {gid!r} is a zero vector")
        ids.append(gid)
        rows.append(v / n)
    if not ids:
        raise EmptyGallery("no records")
    return Gallery(ids, np.stack(rows))


@dataclass(frozen=True)
class RankedList:
    """Ordered (id, cosine score) pairs from one ranking pass."""

    entries: tuple
    query_id: str = ""
    params_used: PDVParams | None = None

    def ids(self) -> list[str]:
        return [gid for gid, _ in self.entries]

    def to_dict(self) -> dict:
        out = {
            "query_id": self.query_id,
            "entries": [{"id": gid, "score": score} for gid, score in self.entries],
        }
        if self.params_used is not None:
            out["params_used"] = self.params_used.to_dict()
        return out


@dataclass(frozen=True)
class FilterSpec:
    """Predicate for shrinking a gallery ahead of cheap re-ranking.

    ``drop_if_distance_above`` keeps rows with cosine distance (1 - cos)
    at most ``threshold``; ``keep_if_similarity_at_least`` keeps rows with
    cosine similarity at least ``threshold``.
    """

    mode: str = FILTER_DROP_DISTANCE
    threshold: float = 0.8
    source_ranking: str = ""

    def __post_init__(self):
        if self.mode not in (FILTER_DROP_DISTANCE, FILTER_KEEP_SIMILARITY):
            raise InvalidParameter(f"unknown filter mode {self.mode!r}")
        thr = float(self.threshold)
        if not np.isfinite(thr):
            raise InvalidParameter("threshold must be finite")
        lo, hi = (0.0, 2.0) if self.mode == FILTER_DROP_DISTANCE else (-1.0, 1.0)
        if not (lo <= thr <= hi):
            raise InvalidParameter(
                f"threshold {thr} outside [{lo}, {hi}] for mode {self.mode}"
            )
        object.__setattr__(self, "threshold", thr)


def _unit_query(gallery: Gallery, query) -> np.ndarray:
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if q.shape[0] != gallery.dim:
        raise DimensionMismatch(f"query dim {q.shape[0]} vs gallery dim {gallery.dim}")
    n = float(np.linalg.norm(q))
    if n <= 1e-12:
        raise ZeroQuery("query vector has zero norm")
    return q / n


def _candidate_indices(gallery: Gallery, restrict_to) -> np.ndarray | None:
    if restrict_to is None:
        return None
    rset = set(restrict_to)
    unknown = rset.difference(gallery.ids)
    if unknown:
        raise SubsetNotInGallery(f"ids not in gallery: {sorted(unknown)[:5]}")
    return np.fromiter(
        (i for i, gid in enumerate(gallery.ids) if gid in rset), dtype=np.int64
    )


def _scores(gallery: Gallery, unit_q: np.ndarray, idx: np.ndarray | None) -> np.ndarray:
    matrix = gallery.matrix if idx is None else np.ascontiguousarray(gallery.matrix[idx])
    scores = kernels.cosine_scores(matrix, unit_q)
    np.clip(scores, -1.0, 1.0, out=scores)
    return scores


def _topk_order(scores: np.ndarray, ids: list[str], k: int) -> list[int]:
    # partial selection, then exact (score desc, id asc) ordering over the
    # candidates at or above the k-th score so boundary ties stay deterministic
    n = scores.shape[0]
    k = min(k, n)
    if k == 0:
        return []
    if k < n:
        top = np.argpartition(-scores, k - 1)[:k]
        boundary = scores[top].min()
        cand = np.flatnonzero(scores >= boundary)
    else:
        cand = np.arange(n)
    order = sorted(cand.tolist(), key=lambda i: (-scores[i], ids[i]))
    return order[:k]


def rank_topk(
    gallery: Gallery,
    query,
    k: int,
    restrict_to=None,
    *,
    query_id: str = "",
    params: PDVParams | None = None,
) -> RankedList:
    """Exact cosine top-k over the gallery (or a candidate subset).

    Returns min(k, candidates) entries sorted by score descending, ties by
    ascending id. ``restrict_to`` limits candidates by id.
    """
    if k < 1:
        raise InvalidParameter(f"k must be >= 1, got {k}")
    unit_q = _unit_query(gallery, query)
    idx = _candidate_indices(gallery, restrict_to)
    scores = _scores(gallery, unit_q, idx)
    cand_ids = list(gallery.ids) if idx is None else [gallery.ids[i] for i in idx]
    order = _topk_order(scores, cand_ids, k)
    entries = tuple((cand_ids[i], float(scores[i])) for i in order)
    return RankedList(entries=entries, query_id=query_id, params_used=params)


def filter_gallery(gallery: Gallery, initial_query, spec: FilterSpec) -> set[str]:
    """Ids passing the filter predicate against ``initial_query``.

    May be empty; the caller decides the fallback.
    """
    unit_q = _unit_query(gallery, initial_query)
    scores = _scores(gallery, unit_q, None)
    if spec.mode == FILTER_DROP_DISTANCE:
        mask = (1.0 - scores) <= spec.threshold
    else:
        mask = scores >= spec.threshold
    return {gallery.ids[i] for i in np.flatnonzero(mask)}


@dataclass
class Session:
    """Cached query state for repeated parameter re-tries.

    The normalised embeddings and residual live in ``cache``; re-ranking
    never touches source embeddings or disk again.
    """

    bundle: QueryBundle
    gallery: Gallery
    cache: QueryCache
    active_filter: set | None = None

    @classmethod
    def start(cls, bundle: QueryBundle, gallery: Gallery) -> "Session":
        if bundle.dim != gallery.dim:
            raise DimensionMismatch(
                f"bundle dim {bundle.dim} vs gallery dim {gallery.dim}"
            )
        return cls(bundle=bundle, gallery=gallery, cache=QueryCache.from_bundle(bundle))


def rerank_session(
    session: Session, params: PDVParams, k: int, *, use_filter: bool = True
) -> RankedList:
    """Re-rank from the session cache; pure vector arithmetic, no ingestion."""
    query = compose_from_cache(session.cache, params)
    restrict = session.active_filter if use_filter else None
    if restrict is not None and len(restrict) == 0:
        return RankedList(
            entries=(), query_id=session.bundle.query_id, params_used=params
        )
    return rank_topk(
        session.gallery,
        query,
        k,
        restrict_to=restrict,
        query_id=session.bundle.query_id,
        params=params,
    )

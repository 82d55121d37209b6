"""Retrieval quality metrics: hit recall, truncated average precision, and
subset recall, plus batch evaluation over a set of query bundles.

Recall@k is any-hit and binary per query (the usual convention when each
query annotates one or a few targets). AP@k normalises by min(k, #targets).
Subset recall ranks only a per-query candidate list before applying recall.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import PDVParams, compute_query_embedding
from .errors import (
    DegenerateQuery,
    InvalidParameter,
    MissingTarget,
    SubsetNotInGallery,
    TargetNotInSubset,
)
from .retrieval import Gallery, RankedList, rank_topk


def recall_at_k(ranked: RankedList, targets, k: int) -> float:
    """1.0 if any target id appears in the first min(k, len) entries."""
    if k < 1:
        raise InvalidParameter(f"k must be >= 1, got {k}")
    targets = set(targets)
    if not targets:
        raise MissingTarget("no target ids")
    for gid, _ in ranked.entries[:k]:
        if gid in targets:
            return 1.0
    return 0.0


def map_at_k(ranked: RankedList, targets, k: int) -> float:
    """Truncated average precision with multi-target normalisation.

    AP@k = sum_i Precision@i * rel(i) / min(k, #targets), i = 1..k.
    """
    if k < 1:
        raise InvalidParameter(f"k must be >= 1, got {k}")
    targets = set(targets)
    if not targets:
        raise MissingTarget("no target ids")
    hits = 0
    ap = 0.0
    for i, (gid, _) in enumerate(ranked.entries[:k], start=1):
        if gid in targets:
            hits += 1
            ap += hits / i
    return ap / min(k, len(targets))


def subset_recall_at_k(
    gallery: Gallery, query, subset_ids, targets, k: int
) -> float:
    """Recall@k after ranking only the per-query candidate subset."""
    subset = list(subset_ids)
    missing = [s for s in subset if s not in gallery]
    if missing:
        raise SubsetNotInGallery(f"subset ids not in gallery: {missing[:5]}")
    targets = set(targets)
    outside = targets.difference(subset)
    if outside:
        raise TargetNotInSubset(f"targets outside subset: {sorted(outside)[:5]}")
    ranked = rank_topk(gallery, query, k, restrict_to=subset)
    return recall_at_k(ranked, targets, k)


@dataclass
class EvalReport:
    """Mean metric values over a batch of queries."""

    per_metric: dict
    num_queries: int
    params_used: PDVParams
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "per_metric": dict(self.per_metric),
            "num_queries": self.num_queries,
            "params_used": self.params_used.to_dict(),
            "warnings": list(self.warnings),
        }


def evaluate_manifest(
    gallery: Gallery, bundles, params: PDVParams, ks
) -> EvalReport:
    """Rank every bundle with one parameter setting and average the metrics.

    Emits recall@k and map@k for each requested k, and rs@k averaged over
    the bundles that carry a candidate subset. Bundles whose composition
    cancels to zero count as 0 on every metric and are listed in warnings.
    """
    bundles = list(bundles)
    ks = sorted(set(int(k) for k in ks))
    if not bundles:
        raise InvalidParameter("no bundles to evaluate")
    if not ks or ks[0] < 1:
        raise InvalidParameter(f"invalid k list {ks}")

    for b in bundles:
        if not b.target_ids:
            raise MissingTarget(f"bundle {b.query_id!r} has no target ids")
        absent = [t for t in b.target_ids if t not in gallery]
        if absent:
            raise MissingTarget(
                f"bundle {b.query_id!r} targets not in gallery: {sorted(absent)[:5]}"
            )

    kmax = ks[-1]
    recall_sum = {k: 0.0 for k in ks}
    map_sum = {k: 0.0 for k in ks}
    rs_sum = {k: 0.0 for k in ks}
    rs_count = 0
    warnings = []

    for b in bundles:
        try:
            query = compute_query_embedding(b, params)
        except DegenerateQuery:
            warnings.append(f"{b.query_id}: degenerate query, scored 0")
            if b.subset_ids is not None:
                rs_count += 1
            continue
        ranked = rank_topk(gallery, query, kmax, query_id=b.query_id, params=params)
        for k in ks:
            recall_sum[k] += recall_at_k(ranked, b.target_ids, k)
            map_sum[k] += map_at_k(ranked, b.target_ids, k)
        if b.subset_ids is not None:
            rs_count += 1
            sub_ranked = rank_topk(
                gallery, query, kmax, restrict_to=b.subset_ids, query_id=b.query_id
            )
            for k in ks:
                rs_sum[k] += recall_at_k(sub_ranked, b.target_ids, k)

    n = len(bundles)
    per_metric = {}
    for k in ks:
        per_metric[f"recall@{k}"] = recall_sum[k] / n
        per_metric[f"map@{k}"] = map_sum[k] / n
    if rs_count:
        for k in ks:
            per_metric[f"rs@{k}"] = rs_sum[k] / rs_count
    return EvalReport(
        per_metric=per_metric, num_queries=n, params_used=params, warnings=warnings
    )

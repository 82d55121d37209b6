from __future__ import annotations

import numpy as np
import pytest

from pdvret.core import PDVParams, QueryBundle, normalize
from pdvret.errors import MissingTarget, SubsetNotInGallery, TargetNotInSubset
from pdvret.metrics import (
    evaluate_manifest,
    map_at_k,
    recall_at_k,
    subset_recall_at_k,
)
from pdvret.retrieval import RankedList, build_gallery, rank_topk

from conftest import make_bundle, make_gallery, random_unit


def ranked(ids):
    # descending dummy scores; metric code must only read ids and order
    return RankedList(entries=tuple((g, 1.0 - i * 0.01) for i, g in enumerate(ids)))


# --- independent oracles (pure python, no engine code) ---------------------


def oracle_rank(gallery_rows, ids, query):
    q = np.asarray(query, dtype=np.float64)
    q = q / np.linalg.norm(q)
    scored = []
    for gid, row in zip(ids, gallery_rows):
        r = np.asarray(row, dtype=np.float64)
        scored.append((gid, float(np.dot(r / np.linalg.norm(r), q))))
    return [g for g, _ in sorted(scored, key=lambda e: (-e[1], e[0]))]


def oracle_recall(order, targets, k):
    return 1.0 if any(g in targets for g in order[:k]) else 0.0


def oracle_ap(order, targets, k):
    hits = 0
    total = 0.0
    for i, gid in enumerate(order[:k], start=1):
        if gid in targets:
            hits += 1
            total += hits / i
    return total / min(k, len(targets))


class TestRecall:
    def test_target_first(self):
        assert recall_at_k(ranked(["t", "x"]), {"t"}, 1) == 1.0

    def test_target_eleventh(self):
        order = [f"x{i}" for i in range(10)] + ["t"]
        assert recall_at_k(ranked(order), {"t"}, 10) == 0.0

    def test_any_hit_rule(self):
        assert recall_at_k(ranked(["c", "b", "d"]), {"a", "b"}, 2) == 1.0

    def test_non_decreasing_in_k(self, rng):
        for _ in range(20):
            order = [f"g{i}" for i in rng.permutation(30)]
            targets = {f"g{int(i)}" for i in rng.choice(30, 3, replace=False)}
            vals = [recall_at_k(ranked(order), targets, k) for k in range(1, 31)]
            assert all(a <= b for a, b in zip(vals, vals[1:]))

    def test_empty_targets_rejected(self):
        with pytest.raises(MissingTarget):
            recall_at_k(ranked(["a"]), set(), 1)


class TestMapAtK:
    def test_single_target_rank1(self):
        assert map_at_k(ranked(["t", "x", "y"]), {"t"}, 5) == 1.0

    def test_single_target_rank2(self):
        assert map_at_k(ranked(["x", "t", "y"]), {"t"}, 5) == 0.5

    def test_two_targets_ranks_1_and_3(self):
        val = map_at_k(ranked(["t1", "x", "t2", "y", "z"]), {"t1", "t2"}, 5)
        assert abs(val - (1.0 + 2.0 / 3.0) / 2.0) < 1e-12

    def test_perfect_iff_targets_fill_top(self, rng):
        order = ["t1", "t2", "x", "y"]
        assert map_at_k(ranked(order), {"t1", "t2"}, 5) == 1.0
        assert map_at_k(ranked(["t1", "x", "t2", "y"]), {"t1", "t2"}, 5) < 1.0

    def test_in_unit_interval(self, rng):
        for _ in range(50):
            order = [f"g{i}" for i in rng.permutation(20)]
            targets = {f"g{int(i)}" for i in rng.choice(20, int(rng.integers(1, 6)), replace=False)}
            k = int(rng.integers(1, 25))
            val = map_at_k(ranked(order), targets, k)
            assert 0.0 <= val <= 1.0

    def test_matches_oracle(self, rng):
        for _ in range(100):
            n = int(rng.integers(3, 25))
            order = [f"g{i}" for i in rng.permutation(n)]
            targets = {f"g{int(i)}" for i in rng.choice(n, int(rng.integers(1, 4)), replace=False)}
            k = int(rng.integers(1, n + 3))
            assert map_at_k(ranked(order), targets, k) == oracle_ap(order, targets, k)


class TestSubsetRecall:
    def test_most_similar_target(self, rng):
        g = make_gallery(rng, 20, 6)
        target = g.ids[4]
        query = g.matrix[4]
        subset = [g.ids[i] for i in (4, 6, 8, 10, 12, 14)]
        assert subset_recall_at_k(g, query, subset, {target}, 1) == 1.0

    def test_least_similar_target(self):
        rows = [("t", [1.0, 0.0])] + [(f"d{i}", [0.0, 1.0]) for i in range(5)]
        g = build_gallery(rows)
        # query opposite to target, aligned with distractors
        val = subset_recall_at_k(g, [-1.0, 1000.0], list(g.ids), {"t"}, 3)
        assert val == 0.0

    def test_full_gallery_subset_equals_recall(self, rng):
        g = make_gallery(rng, 15, 6)
        q = random_unit(rng, 6)
        targets = {g.ids[3]}
        full = recall_at_k(rank_topk(g, q, 5), targets, 5)
        assert subset_recall_at_k(g, q, list(g.ids), targets, 5) == full

    def test_subset_not_in_gallery(self, rng):
        g = make_gallery(rng, 5, 4)
        with pytest.raises(SubsetNotInGallery):
            subset_recall_at_k(g, random_unit(rng, 4), ["nope"], {"nope"}, 1)

    def test_target_not_in_subset(self, rng):
        g = make_gallery(rng, 5, 4)
        with pytest.raises(TargetNotInSubset):
            subset_recall_at_k(g, random_unit(rng, 4), [g.ids[0]], {g.ids[1]}, 1)


def _eval_bundle(rng, gallery, dim, query_id, with_subset=False):
    target = gallery.ids[int(rng.integers(0, len(gallery)))]
    kwargs = {}
    if with_subset:
        others = [g for g in gallery.ids if g != target]
        picks = [others[int(i)] for i in rng.choice(len(others), 5, replace=False)]
        kwargs["subset_ids"] = tuple([target] + picks)
    return QueryBundle(
        query_id=query_id,
        ref_text=random_unit(rng, dim),
        composed_text=random_unit(rng, dim),
        ref_image=random_unit(rng, dim),
        target_ids=frozenset({target}),
        **kwargs,
    )


class TestEvaluateManifest:
    def test_mean_of_recalls(self, rng):
        g = build_gallery([("a", [1, 0]), ("b", [0, 1])])
        hit = QueryBundle("hit", [1, 0], [1, 0], [1, 0], target_ids=frozenset({"a"}))
        miss = QueryBundle("miss", [1, 0], [1, 0], [1, 0], target_ids=frozenset({"b"}))
        report = evaluate_manifest(g, [hit, miss], PDVParams(), [1])
        assert report.per_metric["recall@1"] == 0.5
        assert report.num_queries == 2

    def test_baseline_identity_matches_direct(self, rng):
        g = make_gallery(rng, 30, 8)
        bundles = [_eval_bundle(rng, g, 8, f"q{i}") for i in range(10)]
        report = evaluate_manifest(g, bundles, PDVParams(1.0, 1.0, 1.0), [5, 10])
        direct = {5: [], 10: []}
        for b in bundles:
            r = rank_topk(g, normalize(b.composed_text), 10)
            for k in (5, 10):
                direct[k].append(recall_at_k(r, b.target_ids, k))
        for k in (5, 10):
            assert report.per_metric[f"recall@{k}"] == np.mean(direct[k])

    def test_oracle_equivalence(self, rng):
        # full pipeline vs a from-scratch implementation on small instances
        from pdvret.core import compute_query_embedding

        for trial in range(20):
            dim = int(rng.integers(2, 9))
            n = int(rng.integers(5, 50))
            g = make_gallery(rng, n, dim, prefix=f"o{trial}_")
            bundles = [_eval_bundle(rng, g, dim, f"q{trial}_{i}") for i in range(5)]
            ks = [1, 3, 5]
            report = evaluate_manifest(g, bundles, PDVParams(1.2, 0.8, 0.6), ks)
            rec = {k: [] for k in ks}
            ap = {k: [] for k in ks}
            for b in bundles:
                q = compute_query_embedding(b, PDVParams(1.2, 0.8, 0.6))
                order = oracle_rank(g.matrix, g.ids, q)
                for k in ks:
                    rec[k].append(oracle_recall(order, b.target_ids, k))
                    ap[k].append(oracle_ap(order, b.target_ids, k))
            for k in ks:
                assert report.per_metric[f"recall@{k}"] == np.mean(rec[k])
                assert report.per_metric[f"map@{k}"] == pytest.approx(np.mean(ap[k]), abs=1e-12)

    def test_subset_metrics_emitted(self, rng):
        g = make_gallery(rng, 20, 6)
        bundles = [
            _eval_bundle(rng, g, 6, f"q{i}", with_subset=(i % 2 == 0)) for i in range(4)
        ]
        report = evaluate_manifest(g, bundles, PDVParams(), [1, 3])
        assert "rs@1" in report.per_metric and "rs@3" in report.per_metric

    def test_no_subsets_no_rs(self, rng):
        g = make_gallery(rng, 10, 6)
        bundles = [_eval_bundle(rng, g, 6, f"q{i}") for i in range(3)]
        report = evaluate_manifest(g, bundles, PDVParams(), [1])
        assert not any(k.startswith("rs@") for k in report.per_metric)

    def test_missing_target_fails_fast(self, rng):
        g = make_gallery(rng, 5, 4)
        bad = QueryBundle(
            "q", random_unit(rng, 4), random_unit(rng, 4), random_unit(rng, 4),
            target_ids=frozenset({"absent"}),
        )
        with pytest.raises(MissingTarget):
            evaluate_manifest(g, [bad], PDVParams(), [1])

    def test_degenerate_counts_zero_with_warning(self):
        g = build_gallery([("a", [1, 0]), ("b", [0, 1])])
        ok = QueryBundle("ok", [1, 0], [1, 0], [1, 0], target_ids=frozenset({"a"}))
        # beta=0.5 fusion of opposite vectors cancels
        bad = QueryBundle("bad", [1, 0], [1, 0], [-1, 0], target_ids=frozenset({"a"}))
        report = evaluate_manifest(g, [ok, bad], PDVParams(1.0, 1.0, 0.5), [1])
        assert report.per_metric["recall@1"] == 0.5
        assert any("bad" in w for w in report.warnings)

    def test_scale_invariance_of_metrics(self, rng):
        g = make_gallery(rng, 20, 6)
        q = random_unit(rng, 6)
        targets = {g.ids[2], g.ids[9]}
        for c in (0.25, 4.0):
            r1 = rank_topk(g, q, 10)
            r2 = rank_topk(g, c * q.astype(np.float64), 10)
            for k in (1, 5, 10):
                assert recall_at_k(r1, targets, k) == recall_at_k(r2, targets, k)
                assert map_at_k(r1, targets, k) == map_at_k(r2, targets, k)

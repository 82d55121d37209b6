"""Command-line front door.

Subcommands: rank (one-shot ranking), eval (manifest evaluation report),
tune (per-query image-scale tuning), simulate (angle sweep to CSV),
filter-study (threshold sweep: kept ratio vs recall deltas), serve (HTTP
API). Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys

import numpy as np

from . import fileio, geosim
from .core import PDVParams, QueryBundle, compute_query_embedding
from .errors import PdvError
from .metrics import evaluate_manifest, recall_at_k
from .retrieval import FilterSpec, build_gallery, filter_gallery, rank_topk
from .tuner import tune_many

DEFAULT_PORT = 8000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parse_range(text: str) -> list[float]:
    """Inclusive from:to:step grid, e.g. 0:3:0.1 -> 31 values."""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"expected from:to:step, got {text!r}")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"non-numeric range {text!r}") from None
    if step <= 0 or hi < lo:
        raise UsageError(f"invalid range {text!r}")
    count = int(round((hi - lo) / step)) + 1
    return [lo + i * step for i in range(count)]


def _parse_ks(text: str) -> list[int]:
    try:
        ks = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"invalid k list {text!r}") from None
    if not ks:
        raise UsageError("empty k list")
    return ks


def _load_gallery(path):
    ids, matrix = fileio.load_embedding_file(path)
    return build_gallery(zip(ids, matrix))


def _load_bundle_json(path) -> QueryBundle:
    with open(path) as fh:
        doc = json.load(fh)
    return QueryBundle(
        query_id=doc.get("query_id", "query"),
        ref_text=doc["ref_text"],
        composed_text=doc["composed_text"],
        ref_image=doc["ref_image"],
        target_ids=frozenset(doc.get("target_ids", [])),
        subset_ids=doc.get("subset_ids"),
        prompt_text=doc.get("prompt_text"),
    )


def _load_bundles(manifest_path, embedding_paths):
    embeddings = fileio.load_embedding_map(embedding_paths)
    return fileio.load_manifest(manifest_path, embeddings)


def _cmd_rank(args) -> int:
    gallery = _load_gallery(args.gallery)
    bundle = _load_bundle_json(args.bundle)
    params = PDVParams(alpha_t=args.alpha_t, alpha_i=args.alpha_i, beta=args.beta)
    query = compute_query_embedding(bundle, params)
    ranked = rank_topk(
        gallery, query, args.topk, query_id=bundle.query_id, params=params
    )
    if args.format == "json":
        print(json.dumps(ranked.to_dict(), indent=2))
    else:
        print(f"query {bundle.query_id}  alpha_t={params.alpha_t} "
              f"alpha_i={params.alpha_i} beta={params.beta}")
        print(f"{'rank':>4}  {'id':<24} score")
        for rank, (gid, score) in enumerate(ranked.entries, start=1):
            print(f"{rank:>4}  {gid:<24} {score:.6f}")
    return 0


def _cmd_eval(args) -> int:
    gallery = _load_gallery(args.gallery)
    bundles = _load_bundles(args.manifest, args.embeddings)
    params = PDVParams(alpha_t=args.alpha_t, alpha_i=args.alpha_i, beta=args.beta)
    report = evaluate_manifest(gallery, bundles, params, _parse_ks(args.ks))
    if args.out:
        fileio.write_report(report, args.out, fmt=args.format)
        print(f"wrote {args.out}")
    else:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0


def _cmd_tune(args) -> int:
    bundles = _load_bundles(args.manifest, args.embeddings)
    results = tune_many(bundles, alpha_t=args.alpha_t)
    print(f"{'query':<24} {'alpha_i':>10} {'loss':>12} iters converged")
    for bundle, res in zip(bundles, results):
        print(
            f"{bundle.query_id:<24} {res.alpha_i:>10.4f} {res.loss:>12.6f} "
            f"{res.iterations:>5} {res.converged}"
        )
    mean_alpha = statistics.fmean(r.alpha_i for r in results)
    print(f"mean alpha_i over {len(results)} queries: {mean_alpha:.4f}")
    return 0


def _cmd_simulate(args) -> int:
    config = geosim.SimConfig(
        theta0_deg=args.theta0,
        mag_ratio=args.mag_ratio,
        phi_grid_deg=tuple(_parse_range(args.phi)),
        alpha_grid=tuple(_parse_range(args.alpha)),
        dim=args.dim,
    )
    cells = geosim.theta_heatmap(config)
    geosim.write_heatmap_csv(args.out, cells, config)
    print(f"wrote {len(cells)} cells to {args.out}")
    return 0


def _cmd_filter_study(args) -> int:
    gallery = _load_gallery(args.gallery)
    bundles = _load_bundles(args.manifest, args.embeddings)
    params = PDVParams(alpha_t=args.alpha_t, alpha_i=args.alpha_i, beta=args.beta)
    ks = _parse_ks(args.ks)
    kmax = max(ks)

    queries = [compute_query_embedding(b, params) for b in bundles]
    base = {
        k: statistics.fmean(
            recall_at_k(rank_topk(gallery, q, kmax), b.target_ids, k)
            for q, b in zip(queries, bundles)
        )
        for k in ks
    }
    base_line = " ".join(f"recall@{k}={base[k]:.4f}" for k in ks)
    print(f"baseline ({len(bundles)} queries): {base_line}")
    print(f"{'threshold':>9} {'kept_ratio':>10} " + " ".join(f"{'d_r@' + str(k):>10}" for k in ks))

    for threshold in _parse_range(args.thresholds):
        spec = FilterSpec(mode=args.mode, threshold=threshold)
        kept_frac = []
        recalls = {k: [] for k in ks}
        for q, b in zip(queries, bundles):
            kept = filter_gallery(gallery, q, spec)
            kept_frac.append(len(kept) / len(gallery))
            if kept:
                ranked = rank_topk(gallery, q, kmax, restrict_to=kept)
            else:
                ranked = rank_topk(gallery, q, kmax)
            for k in ks:
                recalls[k].append(recall_at_k(ranked, b.target_ids, k))
        row = f"{threshold:>9.3f} {statistics.fmean(kept_frac):>10.4f}"
        for k in ks:
            row += f" {statistics.fmean(recalls[k]) - base[k]:>+10.4f}"
        print(row)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="pdvret", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_params(p):
        p.add_argument("--alpha-t", type=float, default=1.0)
        p.add_argument("--alpha-i", type=float, default=1.0)
        p.add_argument("--beta", type=float, default=1.0)

    p = sub.add_parser("rank", help="one-shot ranking of a bundle JSON")
    p.add_argument("--gallery", required=True)
    p.add_argument("--bundle", required=True)
    add_params(p)
    p.add_argument("--topk", type=int, default=50)
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.set_defaults(func=_cmd_rank)

    p = sub.add_parser("eval", help="evaluate a manifest against a gallery")
    p.add_argument("--gallery", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--embeddings", nargs="+", required=True)
    add_params(p)
    p.add_argument("--ks", default="1,5,10,50")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("tune", help="tune alpha_i per query")
    p.add_argument("--manifest", required=True)
    p.add_argument("--embeddings", nargs="+", required=True)
    p.add_argument("--alpha-t", type=float, default=1.0)
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("simulate", help="angle sweep heatmap to CSV")
    p.add_argument("--theta0", type=float, default=geosim.DEFAULT_THETA0_DEG)
    p.add_argument("--mag-ratio", type=float, default=geosim.DEFAULT_MAG_RATIO)
    p.add_argument("--phi", required=True, help="from:to:step in degrees")
    p.add_argument("--alpha", required=True, help="from:to:step")
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("filter-study", help="threshold sweep: kept ratio vs recall")
    p.add_argument("--gallery", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--embeddings", nargs="+", required=True)
    add_params(p)
    p.add_argument("--thresholds", default="0.5:1.0:0.05", help="from:to:step")
    p.add_argument(
        "--mode",
        choices=("drop_if_distance_above", "keep_if_similarity_at_least"),
        default="drop_if_distance_above",
    )
    p.add_argument("--ks", default="10,50")
    p.set_defaults(func=_cmd_filter_study)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument(
        "--port", type=int, default=int(os.environ.get("PDV_PORT", DEFAULT_PORT))
    )
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except PdvError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()

"""Bit-exact persistence formats.

Embedding collections use a small binary container so float payloads
round-trip exactly and ids travel with the data:

    magic   4 bytes     b"PDV1"
    dim     uint32 LE
    count   uint64 LE
    ids     count x (uint32 LE byte length + UTF-8 bytes)
    data    count x dim float32 LE, row-major

Vectors are stored raw, not pre-normalised; normalisation is the engine's
job. Query manifests are JSON documents grouping queries whose embedding
keys resolve against loaded embedding collections. A one-way CSV import
(``id,v1,...,vD`` rows) exists for interop.
"""

from __future__ import annotations

import csv
import json
import struct
from typing import Mapping

import numpy as np

from .core import QueryBundle
from .errors import (
    BadMagic,
    DimensionMismatch,
    DuplicateId,
    InvalidEmbedding,
    IoFailure,
    NonFiniteValue,
    SchemaViolation,
    TruncatedFile,
    UnresolvedKey,
)
from .metrics import EvalReport

MAGIC = b"PDV1"
_HEADER = struct.Struct("<4sIQ")
_IDLEN = struct.Struct("<I")


def write_embedding_file(path, ids, vectors) -> None:
    """Serialise (ids, row vectors) to the binary container."""
    ids = [str(i) for i in ids]
    if len(set(ids)) != len(ids):
        raise DuplicateId("ids must be unique")
    matrix = np.ascontiguousarray(vectors, dtype=np.float32)
    if matrix.ndim != 2 or matrix.shape[0] != len(ids):
        raise DimensionMismatch(
            f"vector array shape {matrix.shape} does not match {len(ids)} ids"
        )
    if not np.isfinite(matrix).all():
        raise NonFiniteValue("refusing to write non-finite values")
    try:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, matrix.shape[1], matrix.shape[0]))
            for gid in ids:
                raw = gid.encode("utf-8")
                fh.write(_IDLEN.pack(len(raw)))
                fh.write(raw)
            fh.write(matrix.astype("<f4").tobytes(order="C"))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise TruncatedFile(f"expected {n} bytes for {what}, got {len(buf)}")
    return buf


def load_embedding_file(path):
    """Read the binary container back into (ids, float32 matrix).

    Declared sizes must match the payload exactly; trailing bytes, short
    reads, non-finite floats and duplicate ids are all rejected.
    """
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    with fh:
        magic, dim, count = _HEADER.unpack(_read_exact(fh, _HEADER.size, "header"))
        if magic != MAGIC:
            raise BadMagic(f"bad magic {magic!r}, expected {MAGIC!r}")
        if dim == 0:
            raise TruncatedFile("declared dim is zero")
        ids = []
        seen = set()
        for i in range(count):
            (idlen,) = _IDLEN.unpack(_read_exact(fh, _IDLEN.size, f"id length {i}"))
            gid = _read_exact(fh, idlen, f"id {i}").decode("utf-8")
            if gid in seen:
                raise DuplicateId(f"duplicate id {gid!r}")
            seen.add(gid)
            ids.append(gid)
        payload = _read_exact(fh, count * dim * 4, "float payload")
        if fh.read(1):
            raise TruncatedFile("trailing bytes after declared payload")
    matrix = np.frombuffer(payload, dtype="<f4").reshape(count, dim).copy()
    if not np.isfinite(matrix).all():
        raise NonFiniteValue(f"{path} contains non-finite values")
    return ids, matrix


def load_embedding_csv(path):
    """One-way import of ``id,v1,...,vD`` rows (no header)."""
    ids = []
    rows = []
    seen = set()
    dim = None
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            gid = row[0]
            try:
                values = [float(x) for x in row[1:]]
            except ValueError as exc:
                raise SchemaViolation(f"{path}:{lineno}: {exc}") from exc
            if not values:
                raise SchemaViolation(f"{path}:{lineno}: row has no values")
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise DimensionMismatch(
                    f"{path}:{lineno}: row has {len(values)} values, expected {dim}"
                )
            if gid in seen:
                raise DuplicateId(f"duplicate id {gid!r}")
            seen.add(gid)
            ids.append(gid)
            rows.append(values)
    if not ids:
        raise SchemaViolation(f"{path}: no rows")
    matrix = np.asarray(rows, dtype=np.float32)
    if not np.isfinite(matrix).all():
        raise NonFiniteValue(f"{path} contains non-finite values")
    return ids, matrix


def load_embedding_map(paths) -> dict[str, np.ndarray]:
    """Merge one or more embedding files into a key -> vector mapping."""
    merged: dict[str, np.ndarray] = {}
    for path in paths:
        ids, matrix = load_embedding_file(path)
        for gid, row in zip(ids, matrix):
            if gid in merged:
                raise DuplicateId(f"key {gid!r} appears in more than one file")
            merged[gid] = row
    return merged


# ---------------------------------------------------------------------------
# query manifests


def _require(obj: Mapping, key: str, kind, where: str):
    if key not in obj:
        raise SchemaViolation(f"{where}: missing field {key!r}")
    val = obj[key]
    if kind is not None and not isinstance(val, kind):
        raise SchemaViolation(f"{where}: field {key!r} has wrong type")
    return val


def load_manifest_document(path) -> dict:
    """Parse and structurally validate a manifest JSON document."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaViolation(f"{path}: manifest must be a JSON object")
    _require(doc, "dataset_name", str, path)
    groups = _require(doc, "groups", list, path)
    if not groups:
        raise SchemaViolation(f"{path}: groups is empty")
    seen_q = set()
    for gi, group in enumerate(groups):
        where = f"{path}: groups[{gi}]"
        if not isinstance(group, dict):
            raise SchemaViolation(f"{where}: group must be an object")
        _require(group, "name", str, where)
        queries = _require(group, "queries", list, where)
        for qi, query in enumerate(queries):
            qwhere = f"{where}.queries[{qi}]"
            if not isinstance(query, dict):
                raise SchemaViolation(f"{qwhere}: query must be an object")
            qid = _require(query, "query_id", str, qwhere)
            if qid in seen_q:
                raise SchemaViolation(f"{qwhere}: duplicate query_id {qid!r}")
            seen_q.add(qid)
            for key in ("ref_text_key", "composed_text_key", "ref_image_key"):
                _require(query, key, str, qwhere)
            target_ids = _require(query, "target_ids", list, qwhere)
            if not target_ids:
                raise SchemaViolation(f"{qwhere}: target_ids is empty")
            subset = query.get("subset_ids")
            if subset is not None:
                if not isinstance(subset, list):
                    raise SchemaViolation(f"{qwhere}: subset_ids must be a list")
                missing = set(target_ids) - set(subset)
                if missing:
                    raise SchemaViolation(
                        f"{qwhere}: subset_ids missing targets {sorted(missing)}"
                    )
            for opt in ("prompt_text", "image_url", "target_embedding_key"):
                if opt in query and not isinstance(query[opt], str):
                    raise SchemaViolation(f"{qwhere}: {opt} must be a string")
    return doc


def write_manifest(path, doc: dict) -> None:
    """Write a manifest document (validated first) as pretty JSON."""
    try:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    load_manifest_document(path)


def _resolve(embeddings: Mapping[str, np.ndarray], key: str, where: str) -> np.ndarray:
    if key not in embeddings:
        raise UnresolvedKey(f"{where}: key {key!r} not found in embedding files")
    return embeddings[key]


def load_manifest(path, embeddings: Mapping[str, np.ndarray]) -> list[QueryBundle]:
    """Resolve a manifest into query bundles, preserving manifest order."""
    doc = load_manifest_document(path)
    bundles = []
    for group in doc["groups"]:
        gname = group["name"]
        for query in group["queries"]:
            qid = query["query_id"]
            target_key = query.get("target_embedding_key")
            try:
                bundles.append(
                    QueryBundle(
                        query_id=qid,
                        ref_text=_resolve(embeddings, query["ref_text_key"], qid),
                        composed_text=_resolve(
                            embeddings, query["composed_text_key"], qid
                        ),
                        ref_image=_resolve(embeddings, query["ref_image_key"], qid),
                        target_ids=frozenset(query["target_ids"]),
                        subset_ids=query.get("subset_ids"),
                        prompt_text=query.get("prompt_text"),
                        image_url=query.get("image_url"),
                        group=gname,
                        target_embedding=(
                            _resolve(embeddings, target_key, qid)
                            if target_key is not None
                            else None
                        ),
                    )
                )
            except InvalidEmbedding as exc:
                raise SchemaViolation(f"{qid}: {exc}") from exc
    return bundles


# ---------------------------------------------------------------------------
# evaluation reports


def write_report(report: EvalReport, path, fmt: str = "json") -> None:
    """Persist a report as JSON (lossless) or CSV (metric,value rows with
    six decimal places and parameter header comments)."""
    if fmt not in ("json", "csv"):
        raise SchemaViolation(f"unknown report format {fmt!r}")
    try:
        if fmt == "json":
            with open(path, "w") as fh:
                json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
                fh.write("\n")
        else:
            with open(path, "w", newline="") as fh:
                p = report.params_used
                fh.write(
                    f"# params alpha_t={p.alpha_t} alpha_i={p.alpha_i} beta={p.beta}\n"
                )
                fh.write(f"# num_queries={report.num_queries}\n")
                for warning in report.warnings:
                    fh.write(f"# warning: {warning}\n")
                fh.write("metric,value\n")
                for name, value in report.per_metric.items():
                    fh.write(f"{name},{value:.6f}\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_report(path) -> EvalReport:
    """Load a JSON report back (CSV is write-only)."""
    from .core import PDVParams

    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{path}: invalid JSON: {exc}") from exc
    for key in ("per_metric", "num_queries", "params_used"):
        _require(doc, key, None, str(path))
    return EvalReport(
        per_metric=dict(doc["per_metric"]),
        num_queries=int(doc["num_queries"]),
        params_used=PDVParams(**doc["params_used"]),
        warnings=list(doc.get("warnings", [])),
    )

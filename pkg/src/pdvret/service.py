"""JSON wire API.

Sessions are in-memory with LRU eviction (``PDV_MAX_SESSIONS``, default
1024): each holds the cached query embeddings and the gallery binding so
parameter re-tries cost vector arithmetic only, never file I/O. Parameters
are clamped to the explored steering ranges at this edge; the library
beneath stays unclamped. Engine errors map to 4xx responses carrying a
stable machine-readable ``code``.
"""

from __future__ import annotations

import base64
import logging
import os
import tempfile
import threading
import time
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import fileio, geosim, metrics, retrieval, tuner
from .core import PDVParams, QueryBundle, compose_from_cache
from .errors import PdvError, SchemaViolation, UnknownGallery, UnknownSession, ZeroGT, ZeroPDV
from .retrieval import FilterSpec, Gallery, Session, filter_gallery, rerank_session

logger = logging.getLogger("pdvret.service")

DEFAULT_MAX_SESSIONS = 1024
DEFAULT_TOPK = 50
BASELINE_PARAMS = PDVParams(alpha_t=1.0, alpha_i=1.0, beta=1.0)

_NOT_FOUND = (UnknownGallery, UnknownSession)


class GalleryBody(BaseModel):
    path: str | None = None
    data_base64: str | None = None


class BundleBody(BaseModel):
    query_id: str = "query"
    ref_text: list[float]
    composed_text: list[float]
    ref_image: list[float]
    target_ids: list[str] = []
    subset_ids: list[str] | None = None
    prompt_text: str | None = None
    image_url: str | None = None
    target_embedding: list[float] | None = None


class SessionBody(BaseModel):
    gallery_id: str
    bundle: BundleBody
    k: int = DEFAULT_TOPK


class ParamsBody(BaseModel):
    alpha_t: float = 1.0
    alpha_i: float = 1.0
    beta: float = 1.0


class RerankBody(BaseModel):
    params: ParamsBody = ParamsBody()
    k: int = DEFAULT_TOPK
    use_filter: bool = True


class FilterBody(BaseModel):
    mode: str = retrieval.FILTER_DROP_DISTANCE
    threshold: float = 0.8


class TuneBody(BaseModel):
    alpha_t: float = 1.0


class SimulateBody(BaseModel):
    theta0_deg: float = geosim.DEFAULT_THETA0_DEG
    mag_ratio: float = geosim.DEFAULT_MAG_RATIO
    phi_grid_deg: list[float]
    alpha_grid: list[float]
    dim: int = 3
    random_completions: int = 0
    seed: int = 0


class EvaluateBody(BaseModel):
    gallery_id: str
    manifest_path: str
    embedding_paths: list[str]
    params: ParamsBody = ParamsBody()
    ks: list[int] = [1, 5, 10, 50]


@dataclass
class SessionState:
    session: Session
    last_params: PDVParams
    last_query: np.ndarray
    created_at: float
    last_used: float
    lock: threading.Lock = field(default_factory=threading.Lock)


class EngineState:
    """Gallery and session registries behind their own locks."""

    def __init__(self, max_sessions: int):
        self.max_sessions = max_sessions
        self.galleries: dict[str, Gallery] = {}
        self.sessions: OrderedDict[str, SessionState] = OrderedDict()
        self._galleries_lock = threading.Lock()
        self._sessions_lock = threading.Lock()

    def add_gallery(self, gallery: Gallery) -> str:
        gid = uuid.uuid4().hex
        with self._galleries_lock:
            self.galleries[gid] = gallery
        return gid

    def get_gallery(self, gid: str) -> Gallery:
        with self._galleries_lock:
            try:
                return self.galleries[gid]
            except KeyError:
                raise UnknownGallery(f"no gallery {gid!r}") from None

    def add_session(self, state: SessionState) -> str:
        sid = uuid.uuid4().hex
        with self._sessions_lock:
            self.sessions[sid] = state
            while len(self.sessions) > self.max_sessions:
                evicted, _ = self.sessions.popitem(last=False)
                logger.info("evicted session %s (LRU)", evicted)
        return sid

    def get_session(self, sid: str) -> SessionState:
        with self._sessions_lock:
            try:
                state = self.sessions[sid]
            except KeyError:
                raise UnknownSession(f"no session {sid!r}") from None
            self.sessions.move_to_end(sid)
            state.last_used = time.time()
            return state


def _bundle_from_body(body: BundleBody) -> QueryBundle:
    return QueryBundle(
        query_id=body.query_id,
        ref_text=body.ref_text,
        composed_text=body.composed_text,
        ref_image=body.ref_image,
        target_ids=frozenset(body.target_ids),
        subset_ids=body.subset_ids,
        prompt_text=body.prompt_text,
        image_url=body.image_url,
        target_embedding=body.target_embedding,
    )


def create_app(max_sessions: int | None = None) -> FastAPI:
    if max_sessions is None:
        max_sessions = int(os.environ.get("PDV_MAX_SESSIONS", DEFAULT_MAX_SESSIONS))
    app = FastAPI(title="pdvret", version="0.1.0")
    state = EngineState(max_sessions=max_sessions)
    app.state.engine = state

    @app.exception_handler(PdvError)
    async def _pdv_error(request: Request, exc: PdvError):
        status = 404 if isinstance(exc, _NOT_FOUND) else 400
        return JSONResponse(
            status_code=status,
            content={"error": {"code": exc.code, "message": str(exc)}},
        )

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "galleries": len(state.galleries), "sessions": len(state.sessions)}

    @app.post("/galleries")
    def create_gallery(body: GalleryBody):
        if (body.path is None) == (body.data_base64 is None):
            raise SchemaViolation("provide exactly one of path or data_base64")
        if body.path is not None:
            ids, matrix = fileio.load_embedding_file(body.path)
        else:
            raw = base64.b64decode(body.data_base64)
            with tempfile.NamedTemporaryFile(suffix=".pdv") as tmp:
                tmp.write(raw)
                tmp.flush()
                ids, matrix = fileio.load_embedding_file(tmp.name)
        gallery = retrieval.build_gallery(zip(ids, matrix))
        gid = state.add_gallery(gallery)
        return {"gallery_id": gid, "count": len(gallery), "dim": gallery.dim}

    @app.post("/sessions")
    def create_session(body: SessionBody):
        gallery = state.get_gallery(body.gallery_id)
        bundle = _bundle_from_body(body.bundle)
        session = Session.start(bundle, gallery)
        ranking = rerank_session(session, BASELINE_PARAMS, body.k)
        query = compose_from_cache(session.cache, BASELINE_PARAMS)
        phi_deg = None
        if bundle.target_embedding is not None:
            try:
                phi_deg = geosim.measure_phi(bundle, bundle.target_embedding)
            except (ZeroPDV, ZeroGT):
                phi_deg = None
        now = time.time()
        sid = state.add_session(
            SessionState(
                session=session,
                last_params=BASELINE_PARAMS,
                last_query=query,
                created_at=now,
                last_used=now,
            )
        )
        return {"session_id": sid, "ranking": ranking.to_dict(), "phi_deg": phi_deg}

    @app.post("/sessions/{sid}/rerank")
    def rerank(sid: str, body: RerankBody):
        st = state.get_session(sid)
        params = PDVParams(**body.params.model_dump()).clamped()
        with st.lock:
            fallback = (
                body.use_filter
                and st.session.active_filter is not None
                and len(st.session.active_filter) == 0
            )
            use_filter = body.use_filter and not fallback
            ranking = rerank_session(st.session, params, body.k, use_filter=use_filter)
            st.last_params = params
            st.last_query = compose_from_cache(st.session.cache, params)
        return {
            "ranking": ranking.to_dict(),
            "params_used": params.to_dict(),
            "filter_fallback": fallback,
        }

    @app.post("/sessions/{sid}/filter")
    def apply_filter(sid: str, body: FilterBody):
        st = state.get_session(sid)
        spec = FilterSpec(
            mode=body.mode,
            threshold=body.threshold,
            source_ranking=st.session.bundle.query_id,
        )
        with st.lock:
            kept = filter_gallery(st.session.gallery, st.last_query, spec)
            st.session.active_filter = kept
            total = len(st.session.gallery)
        return {"kept_count": len(kept), "total": total}

    @app.post("/sessions/{sid}/tune")
    def tune(sid: str, body: TuneBody):
        st = state.get_session(sid)
        with st.lock:
            result = tuner.tune_alpha_i(st.session.bundle, alpha_t=body.alpha_t)
        return result.to_dict()

    @app.post("/simulate")
    def simulate(body: SimulateBody):
        config = geosim.SimConfig(
            theta0_deg=body.theta0_deg,
            mag_ratio=body.mag_ratio,
            phi_grid_deg=tuple(body.phi_grid_deg),
            alpha_grid=tuple(body.alpha_grid),
            dim=body.dim,
            random_completions=body.random_completions,
            seed=body.seed,
        )
        cells = geosim.theta_heatmap(config)
        return {
            "config": config.to_dict(),
            "cells": [
                {
                    "phi_deg": c.phi_deg,
                    "alpha": c.alpha,
                    "theta_deg": c.theta_deg if c.valid else None,
                    "valid": c.valid,
                }
                for c in cells
            ],
        }

    @app.post("/evaluate")
    def evaluate(body: EvaluateBody):
        gallery = state.get_gallery(body.gallery_id)
        embeddings = fileio.load_embedding_map(body.embedding_paths)
        bundles = fileio.load_manifest(body.manifest_path, embeddings)
        params = PDVParams(**body.params.model_dump()).clamped()
        started = time.perf_counter()
        logger.info("evaluate: %d bundles, ks=%s", len(bundles), body.ks)
        report = metrics.evaluate_manifest(gallery, bundles, params, body.ks)
        elapsed = time.perf_counter() - started
        logger.info("evaluate: done in %.3fs", elapsed)
        out = report.to_dict()
        out["elapsed_seconds"] = elapsed
        return out

    return app

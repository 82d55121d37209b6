"""Embedding-space composed image retrieval with steerable prompt residuals."""

from .core import (
    PDVParams,
    QueryBundle,
    QueryCache,
    compose_from_cache,
    compose_image,
    compose_text,
    compute_pdv,
    compute_query_embedding,
    fuse,
    normalize,
)
from .geosim import (
    HeatmapCell,
    SimConfig,
    measure_phi,
    phi_report,
    simulate_theta,
    theta_heatmap,
)
from .metrics import (
    EvalReport,
    evaluate_manifest,
    map_at_k,
    recall_at_k,
    subset_recall_at_k,
)
from .retrieval import (
    FilterSpec,
    Gallery,
    RankedList,
    Session,
    build_gallery,
    filter_gallery,
    rank_topk,
    rerank_session,
)
from .tuner import TuneResult, nelder_mead_scalar, tune_alpha_i, tune_many

__version__ = "0.1.0"

__all__ = [
    "PDVParams",
    "QueryBundle",
    "QueryCache",
    "compose_from_cache",
    "compose_image",
    "compose_text",
    "compute_pdv",
    "compute_query_embedding",
    "fuse",
    "normalize",
    "HeatmapCell",
    "SimConfig",
    "measure_phi",
    "phi_report",
    "simulate_theta",
    "theta_heatmap",
    "EvalReport",
    "evaluate_manifest",
    "map_at_k",
    "recall_at_k",
    "subset_recall_at_k",
    "FilterSpec",
    "Gallery",
    "RankedList",
    "Session",
    "build_gallery",
    "filter_gallery",
    "rank_topk",
    "rerank_session",
    "TuneResult",
    "nelder_mead_scalar",
    "tune_alpha_i",
    "tune_many",
    "__version__",
]

from __future__ import annotations

import base64

import numpy as np
import pytest
from fastapi.testclient import TestClient

from pdvret.fileio import write_embedding_file, write_manifest
from pdvret.service import create_app

from conftest import random_unit


@pytest.fixture
def client():
    return TestClient(create_app(max_sessions=4), raise_server_exceptions=False)


@pytest.fixture
def gallery_file(tmp_path, rng):
    path = tmp_path / "gallery.pdv"
    ids = [f"g{i}" for i in range(12)]
    write_embedding_file(path, ids, rng.standard_normal((12, 6)).astype(np.float32))
    return path


def bundle_payload(rng, dim=6, **overrides):
    payload = {
        "query_id": "q1",
        "ref_text": random_unit(rng, dim).tolist(),
        "composed_text": random_unit(rng, dim).tolist(),
        "ref_image": random_unit(rng, dim).tolist(),
    }
    payload.update(overrides)
    return payload


def make_session(client, rng, gallery_file, k=10):
    gid = client.post("/galleries", json={"path": str(gallery_file)}).json()["gallery_id"]
    resp = client.post(
        "/sessions", json={"gallery_id": gid, "bundle": bundle_payload(rng), "k": k}
    )
    assert resp.status_code == 200
    body = resp.json()
    return gid, body["session_id"], body["ranking"]


class TestHealth:
    def test_healthz(self, client):
        resp = client.get("/healthz")
        assert resp.status_code == 200
        assert resp.json()["status"] == "ok"


class TestGalleries:
    def test_create_from_path(self, client, gallery_file):
        resp = client.post("/galleries", json={"path": str(gallery_file)})
        assert resp.status_code == 200
        body = resp.json()
        assert body["count"] == 12 and body["dim"] == 6

    def test_create_from_upload(self, client, gallery_file):
        data = base64.b64encode(gallery_file.read_bytes()).decode()
        resp = client.post("/galleries", json={"data_base64": data})
        assert resp.status_code == 200

    def test_bad_magic_code(self, client, tmp_path):
        bad = tmp_path / "bad.pdv"
        bad.write_bytes(b"XXXX" + b"\x00" * 16)
        resp = client.post("/galleries", json={"path": str(bad)})
        assert resp.status_code == 400
        assert resp.json()["error"]["code"] == "bad_magic"

    def test_duplicate_upload_distinct_ids(self, client, gallery_file):
        a = client.post("/galleries", json={"path": str(gallery_file)}).json()
        b = client.post("/galleries", json={"path": str(gallery_file)}).json()
        assert a["gallery_id"] != b["gallery_id"]


class TestSessions:
    def test_baseline_ranking_matches_composed_text(self, client, rng, gallery_file):
        from pdvret.core import normalize
        from pdvret.fileio import load_embedding_file
        from pdvret.retrieval import build_gallery, rank_topk

        gid = client.post("/galleries", json={"path": str(gallery_file)}).json()[
            "gallery_id"
        ]
        payload = bundle_payload(rng)
        resp = client.post(
            "/sessions", json={"gallery_id": gid, "bundle": payload, "k": 10}
        )
        ranking = resp.json()["ranking"]

        ids, matrix = load_embedding_file(gallery_file)
        gallery = build_gallery(zip(ids, matrix))
        expect = rank_topk(gallery, normalize(payload["composed_text"]), 10)
        assert [e["id"] for e in ranking["entries"]] == expect.ids()
        assert [e["score"] for e in ranking["entries"]] == [
            s for _, s in expect.entries
        ]

    def test_k_parameter(self, client, rng, gallery_file):
        _, _, ranking = make_session(client, rng, gallery_file, k=3)
        assert len(ranking["entries"]) == 3

    def test_unknown_gallery(self, client, rng):
        resp = client.post(
            "/sessions", json={"gallery_id": "nope", "bundle": bundle_payload(rng)}
        )
        assert resp.status_code == 404
        assert resp.json()["error"]["code"] == "unknown_gallery"

    def test_dimension_mismatch_code(self, client, rng, gallery_file):
        gid = client.post("/galleries", json={"path": str(gallery_file)}).json()[
            "gallery_id"
        ]
        resp = client.post(
            "/sessions", json={"gallery_id": gid, "bundle": bundle_payload(rng, dim=4)}
        )
        assert resp.status_code == 400
        assert resp.json()["error"]["code"] == "dimension_mismatch"

    def test_lru_eviction(self, client, rng, gallery_file):
        sids = [make_session(client, rng, gallery_file)[1] for _ in range(5)]
        resp = client.post(
            "/sessions/" + sids[0] + "/rerank", json={"params": {}, "k": 3}
        )
        assert resp.status_code == 404  # max_sessions=4 evicted the oldest
        resp = client.post(
            "/sessions/" + sids[-1] + "/rerank", json={"params": {}, "k": 3}
        )
        assert resp.status_code == 200


class TestRerank:
    def test_baseline_params_reproduce_initial(self, client, rng, gallery_file):
        _, sid, initial = make_session(client, rng, gallery_file)
        resp = client.post(
            f"/sessions/{sid}/rerank",
            json={"params": {"alpha_t": 1.0, "alpha_i": 1.0, "beta": 1.0}, "k": 10},
        )
        assert resp.json()["ranking"]["entries"] == initial["entries"]

    def test_deterministic(self, client, rng, gallery_file):
        _, sid, _ = make_session(client, rng, gallery_file)
        body = {"params": {"alpha_t": 1.5, "alpha_i": 0.5, "beta": 0.4}, "k": 10}
        a = client.post(f"/sessions/{sid}/rerank", json=body)
        b = client.post(f"/sessions/{sid}/rerank", json=body)
        assert a.content == b.content

    def test_beta_extremes_change_top1_on_orthogonal_bundle(self, client, rng, tmp_path):
        # gallery built so the image-side and text-side nearest items differ
        path = tmp_path / "ortho.pdv"
        rows = np.float32(
            [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0.5, 0.5, 0.5, 0.5]]
        )
        write_embedding_file(path, ["img_like", "txt_like", "other", "mix"], rows)
        gid = client.post("/galleries", json={"path": str(path)}).json()["gallery_id"]
        bundle = {
            "query_id": "q",
            "ref_text": [0.0, 0.70710678, 0.70710678, 0.0],
            "composed_text": [0.0, 1.0, 0.0, 0.0],
            "ref_image": [1.0, 0.0, 0.0, 0.0],
        }
        resp = client.post("/sessions", json={"gallery_id": gid, "bundle": bundle})
        sid = resp.json()["session_id"]
        top_beta0 = client.post(
            f"/sessions/{sid}/rerank",
            json={"params": {"alpha_t": 1.0, "alpha_i": 0.0, "beta": 0.0}, "k": 1},
        ).json()["ranking"]["entries"][0]["id"]
        top_beta1 = client.post(
            f"/sessions/{sid}/rerank",
            json={"params": {"alpha_t": 1.0, "alpha_i": 0.0, "beta": 1.0}, "k": 1},
        ).json()["ranking"]["entries"][0]["id"]
        assert top_beta0 == "img_like"
        assert top_beta1 == "txt_like"
        assert top_beta0 != top_beta1

    def test_params_clamped_at_edge(self, client, rng, gallery_file):
        _, sid, _ = make_session(client, rng, gallery_file)
        resp = client.post(
            f"/sessions/{sid}/rerank",
            json={"params": {"alpha_t": 99.0, "alpha_i": -99.0, "beta": 1.0}, "k": 3},
        )
        used = resp.json()["params_used"]
        assert used["alpha_t"] == 3.0 and used["alpha_i"] == -0.5

    def test_unknown_session(self, client):
        resp = client.post("/sessions/nope/rerank", json={"params": {}, "k": 3})
        assert resp.status_code == 404
        assert resp.json()["error"]["code"] == "unknown_session"

    def test_session_isolation(self, client, rng, gallery_file):
        _, sid_a, _ = make_session(client, rng, gallery_file)
        _, sid_b, initial_b = make_session(client, rng, gallery_file)
        client.post(
            f"/sessions/{sid_a}/rerank",
            json={"params": {"alpha_t": 2.0, "beta": 0.3}, "k": 10},
        )
        again_b = client.post(
            f"/sessions/{sid_b}/rerank", json={"params": {}, "k": 10}
        ).json()["ranking"]["entries"]
        assert again_b == initial_b["entries"]


class TestFilter:
    def test_vacuous_threshold_keeps_all(self, client, rng, gallery_file):
        _, sid, _ = make_session(client, rng, gallery_file)
        resp = client.post(
            f"/sessions/{sid}/filter",
            json={"mode": "keep_if_similarity_at_least", "threshold": -1.0},
        )
        body = resp.json()
        assert body["kept_count"] == body["total"] == 12

    def test_planted_pass_count(self, client, rng, tmp_path):
        path = tmp_path / "planted.pdv"
        rows = [[1.0, 0.0]] * 3 + [[0.0, 1.0]] * 7
        write_embedding_file(
            path, [f"g{i}" for i in range(10)], np.float32(rows)
        )
        gid = client.post("/galleries", json={"path": str(path)}).json()["gallery_id"]
        bundle = {
            "query_id": "q",
            "ref_text": [1.0, 0.0],
            "composed_text": [1.0, 0.0],
            "ref_image": [1.0, 0.0],
        }
        sid = client.post("/sessions", json={"gallery_id": gid, "bundle": bundle}).json()[
            "session_id"
        ]
        resp = client.post(
            f"/sessions/{sid}/filter",
            json={"mode": "keep_if_similarity_at_least", "threshold": 0.5},
        )
        assert resp.json() == {"kept_count": 3, "total": 10}

    def test_rerank_scans_only_kept(self, client, rng, gallery_file):
        _, sid, _ = make_session(client, rng, gallery_file)
        kept = client.post(
            f"/sessions/{sid}/filter",
            json={"mode": "keep_if_similarity_at_least", "threshold": 0.0},
        ).json()["kept_count"]
        assert 0 < kept < 12
        ranking = client.post(
            f"/sessions/{sid}/rerank", json={"params": {}, "k": 12, "use_filter": True}
        ).json()["ranking"]
        assert len(ranking["entries"]) == kept

    def test_empty_filter_falls_back_with_flag(self, client, rng, gallery_file):
        _, sid, _ = make_session(client, rng, gallery_file)
        client.post(
            f"/sessions/{sid}/filter",
            json={"mode": "keep_if_similarity_at_least", "threshold": 1.0},
        )
        resp = client.post(
            f"/sessions/{sid}/rerank", json={"params": {}, "k": 5, "use_filter": True}
        ).json()
        assert resp["filter_fallback"] is True
        assert len(resp["ranking"]["entries"]) == 5


class TestPhiBadge:
    def test_phi_present_with_target_embedding(self, client, rng, gallery_file):
        gid = client.post("/galleries", json={"path": str(gallery_file)}).json()[
            "gallery_id"
        ]
        # exactly representable unit vectors: residual orthogonal to the
        # reference-to-target direction gives 90 degrees
        bundle = {
            "query_id": "q",
            "ref_text": [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            "composed_text": [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            "ref_image": [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            "target_embedding": [0.0, -1.0, 0.0, 0.0, 0.0, 0.0],
        }
        resp = client.post("/sessions", json={"gallery_id": gid, "bundle": bundle})
        assert resp.json()["phi_deg"] == pytest.approx(90.0, abs=1e-6)

    def test_phi_null_without_target_embedding(self, client, rng, gallery_file):
        _, _, _ = make_session(client, rng, gallery_file)
        gid = client.post("/galleries", json={"path": str(gallery_file)}).json()[
            "gallery_id"
        ]
        resp = client.post(
            "/sessions", json={"gallery_id": gid, "bundle": bundle_payload(rng)}
        )
        assert resp.json()["phi_deg"] is None


class TestTuneSimulateEvaluate:
    def test_tune_identity_bundle(self, client, rng, gallery_file):
        gid = client.post("/galleries", json={"path": str(gallery_file)}).json()[
            "gallery_id"
        ]
        v = random_unit(rng, 6).tolist()
        bundle = bundle_payload(rng, ref_text=v, ref_image=v)
        sid = client.post("/sessions", json={"gallery_id": gid, "bundle": bundle}).json()[
            "session_id"
        ]
        resp = client.post(f"/sessions/{sid}/tune", json={"alpha_t": 1.0})
        assert abs(resp.json()["alpha_i"] - 1.0) < 1e-4

    def test_simulate_single_cell(self, client):
        from pdvret.geosim import simulate_theta

        resp = client.post(
            "/simulate",
            json={
                "theta0_deg": 45.0,
                "mag_ratio": 0.5,
                "phi_grid_deg": [30.0],
                "alpha_grid": [1.5],
            },
        )
        cells = resp.json()["cells"]
        assert len(cells) == 1
        assert cells[0]["theta_deg"] == pytest.approx(
            simulate_theta(45.0, 0.5, 30.0, 1.5), abs=1e-12
        )

    def test_evaluate_baseline(self, client, rng, tmp_path, gallery_file):
        from pdvret.fileio import write_embedding_file as write_emb

        emb_path = tmp_path / "queries.pdv"
        keys = ["q1_rt", "q1_ct", "q1_ri"]
        write_emb(emb_path, keys, rng.standard_normal((3, 6)).astype(np.float32))
        manifest_path = tmp_path / "m.json"
        write_manifest(
            manifest_path,
            {
                "dataset_name": "demo",
                "groups": [
                    {
                        "name": "all",
                        "queries": [
                            {
                                "query_id": "q1",
                                "ref_text_key": "q1_rt",
                                "composed_text_key": "q1_ct",
                                "ref_image_key": "q1_ri",
                                "target_ids": ["g3"],
                            }
                        ],
                    }
                ],
            },
        )
        gid = client.post("/galleries", json={"path": str(gallery_file)}).json()[
            "gallery_id"
        ]
        resp = client.post(
            "/evaluate",
            json={
                "gallery_id": gid,
                "manifest_path": str(manifest_path),
                "embedding_paths": [str(emb_path)],
                "params": {"alpha_t": 1.0, "alpha_i": 1.0, "beta": 1.0},
                "ks": [1, 12],
            },
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["num_queries"] == 1
        assert body["per_metric"]["recall@12"] == 1.0

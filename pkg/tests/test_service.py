import json
import threading
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from flowsurrogate.explorer import (
    FitnessWeights,
    GAConfig,
    candidate_seed,
    make_preference,
    optimize,
)
from flowsurrogate.service import (
    PREFERENCE_UQ_SAMPLES,
    create_app,
    predict_payload,
    recommend_payload,
    reverse_payload,
)
from flowsurrogate.data import FieldGrid
from flowsurrogate.surrogate import predict_latent_stats

SESSION_SEED = 5


def canonical(doc) -> bytes:
    return json.dumps(doc, sort_keys=True).encode()


@pytest.fixture()
def client(tiny_artifacts, tmp_path):
    app = create_app(tiny_artifacts["workspace"], tmp_path / "state")
    with TestClient(app) as c:
        c.state_dir = tmp_path / "state"
        yield c


def new_session(client, **overrides):
    body = {"dataset": "ds.json", "ae": "ae.npz", "flow": "flow.npz",
            "seed": SESSION_SEED}
    body.update(overrides)
    resp = client.post("/sessions", json=body)
    assert resp.status_code == 200, resp.text
    return resp.json()["session_id"]


def wait_for_run(client, session_id, run_id, timeout=30.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        doc = client.get(f"/sessions/{session_id}/ga/{run_id}").json()
        if doc["status"] in ("done", "failed"):
            return doc
        time.sleep(0.02)
    raise TimeoutError("GA run did not finish in time")


class TestSessions:
    def test_create_and_fetch(self, client, tiny_artifacts):
        sid = new_session(client)
        doc = client.get(f"/sessions/{sid}").json()
        assert doc["id"] == sid
        assert doc["preferences"] == []
        assert doc["param_space"] == tiny_artifacts["dataset"].space.to_json()

    def test_two_sessions_have_distinct_ids(self, client):
        assert new_session(client) != new_session(client)

    def test_missing_artifact_404(self, client):
        resp = client.post("/sessions", json={"dataset": "nope.json",
                                              "ae": "ae.npz", "flow": "flow.npz"})
        assert resp.status_code == 404
        assert resp.json()["code"] == "not_found"

    def test_flow_referencing_other_ae_conflicts(self, client):
        resp = client.post("/sessions", json={"dataset": "ds.json",
                                              "ae": "ae-other.npz", "flow": "flow.npz"})
        assert resp.status_code == 409
        assert resp.json()["code"] == "conflict"

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/deadbeef").status_code == 404


class TestPredict:
    def test_single_sample_variance_slices_zero(self, client):
        sid = new_session(client)
        resp = client.post(f"/sessions/{sid}/predict",
                           json={"params": [0.4, 0.5, 0.6], "n": 1})
        assert resp.status_code == 200
        doc = resp.json()
        for axis in ("x", "y", "z"):
            assert all(v == 0.0 for v in doc["var_slices"][axis]["values"])

    def test_same_request_identical_payloads(self, client):
        sid = new_session(client)
        body = {"params": [0.2, 0.5, 0.8], "n": 4}
        a = client.post(f"/sessions/{sid}/predict", json=body)
        b = client.post(f"/sessions/{sid}/predict", json=body)
        assert a.content == b.content

    def test_payload_byte_equals_direct_library_call(self, client, tiny_artifacts):
        sid = new_session(client)
        resp = client.post(f"/sessions/{sid}/predict",
                           json={"params": [0.3, 0.6, 0.9], "n": 5, "seed": 11})
        expected = predict_payload(tiny_artifacts["flow"], tiny_artifacts["ae"],
                                   tiny_artifacts["dataset"].space,
                                   [0.3, 0.6, 0.9], 5, 11)
        assert canonical(resp.json()) == canonical(expected)

    def test_out_of_range_param_names_dimension(self, client):
        sid = new_session(client)
        resp = client.post(f"/sessions/{sid}/predict",
                           json={"params": [0.4, 1.5, 0.6], "n": 2})
        assert resp.status_code == 422
        assert "p2" in resp.json()["message"]

    def test_slices_match_library_field_planes(self, client, tiny_artifacts):
        from flowsurrogate.surrogate import normalize, predict_and_quantify

        sid = new_session(client)
        doc = client.post(f"/sessions/{sid}/predict",
                          json={"params": [0.1, 0.2, 0.3], "n": 3, "seed": 2}).json()
        params = normalize(tiny_artifacts["dataset"].space, np.array([0.1, 0.2, 0.3]))
        uq = predict_and_quantify(tiny_artifacts["flow"], tiny_artifacts["ae"],
                                  params, 3, 2)
        vol = uq.mean_field.as_3d()
        d, h, w = uq.mean_field.dims
        assert doc["mean_slices"]["z"]["values"] == [float(v) for v in vol[d // 2].ravel()]
        assert doc["mean_slices"]["y"]["values"] == [float(v) for v in vol[:, h // 2, :].ravel()]
        assert doc["mean_slices"]["x"]["values"] == [float(v) for v in vol[:, :, w // 2].ravel()]


class TestPreferences:
    def test_score_out_of_range_rejected(self, client):
        sid = new_session(client)
        resp = client.post(f"/sessions/{sid}/preferences",
                           json={"params": [0.5, 0.5, 0.5], "score": 1.1})
        assert resp.status_code == 422

    def test_add_and_round_trip(self, client):
        sid = new_session(client)
        resp = client.post(f"/sessions/{sid}/preferences",
                           json={"params": [0.5, 0.4, 0.3], "score": 0.7})
        table = resp.json()["preferences"]
        assert len(table) == 1
        assert table[0]["params_raw"] == [0.5, 0.4, 0.3]
        assert table[0]["score"] == 0.7
        doc = client.get(f"/sessions/{sid}").json()
        assert doc["preferences"][0]["params_raw"] == [0.5, 0.4, 0.3]

    def test_idempotent_on_identical_entry(self, client):
        sid = new_session(client)
        body = {"params": [0.5, 0.4, 0.3], "score": 0.7}
        client.post(f"/sessions/{sid}/preferences", json=body)
        table = client.post(f"/sessions/{sid}/preferences", json=body).json()["preferences"]
        assert len(table) == 1

    def test_stored_latent_matches_library(self, client, tiny_artifacts):
        from flowsurrogate.surrogate import normalize

        sid = new_session(client)
        client.post(f"/sessions/{sid}/preferences",
                    json={"params": [0.5, 0.4, 0.3], "score": 0.7})
        doc = client.get(f"/sessions/{sid}").json()
        params = normalize(tiny_artifacts["dataset"].space, np.array([0.5, 0.4, 0.3]))
        mean, _ = predict_latent_stats(tiny_artifacts["flow"], params,
                                       PREFERENCE_UQ_SAMPLES, seed=SESSION_SEED)
        assert doc["preferences"][0]["latent_mean"] == [float(v) for v in mean]

    def test_delete(self, client):
        sid = new_session(client)
        client.post(f"/sessions/{sid}/preferences",
                    json={"params": [0.5, 0.4, 0.3], "score": 0.7})
        table = client.delete(f"/sessions/{sid}/preferences/0").json()["preferences"]
        assert table == []
        assert client.delete(f"/sessions/{sid}/preferences/5").status_code == 404


GA_BODY = {
    "config": {"population": 6, "generations": 4, "uq_samples": 4, "seed": 9},
    "weights": {"w1": 0.6, "w2": 0.3, "w3": -0.5},
}


class TestGaRuns:
    def test_start_without_preferences_rejected(self, client):
        sid = new_session(client)
        resp = client.post(f"/sessions/{sid}/ga", json=GA_BODY)
        assert resp.status_code == 422

    def test_run_completes_with_expected_generations(self, client):
        sid = new_session(client)
        client.post(f"/sessions/{sid}/preferences",
                    json={"params": [0.5, 0.4, 0.3], "score": 0.7})
        run_id = client.post(f"/sessions/{sid}/ga", json=GA_BODY).json()["run_id"]
        doc = wait_for_run(client, sid, run_id)
        assert doc["status"] == "done"
        assert len(doc["generations"]) == GA_BODY["config"]["generations"] + 1
        assert doc["generations_done"] == 5

    def test_lineage_equals_direct_library_run(self, client, tiny_artifacts):
        from flowsurrogate.explorer import lineage_to_doc

        sid = new_session(client)
        client.post(f"/sessions/{sid}/preferences",
                    json={"params": [0.5, 0.4, 0.3], "score": 0.7})
        run_id = client.post(f"/sessions/{sid}/ga", json=GA_BODY).json()["run_id"]
        doc = wait_for_run(client, sid, run_id)

        space = tiny_artifacts["dataset"].space
        prefs = [make_preference(tiny_artifacts["flow"], space, [0.5, 0.4, 0.3], 0.7,
                                 seed=SESSION_SEED)]
        cfg = GAConfig(**GA_BODY["config"])
        weights = FitnessWeights(0.6, 0.3, -0.5)
        records = optimize(cfg, prefs, weights, tiny_artifacts["flow"])
        expected = lineage_to_doc(records, space)["generations"]
        assert canonical(doc["generations"]) == canonical(expected)

    def test_concurrent_starts_one_conflict(self, client):
        sid = new_session(client)
        client.post(f"/sessions/{sid}/preferences",
                    json={"params": [0.5, 0.4, 0.3], "score": 0.7})
        long_body = {"config": {"population": 12, "generations": 120, "uq_samples": 4,
                                "seed": 1}, "weights": {"w1": 1, "w2": 0, "w3": 0}}
        codes = []

        def start():
            codes.append(client.post(f"/sessions/{sid}/ga", json=long_body).status_code)

        threads = [threading.Thread(target=start) for _ in range(2)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(codes) == [200, 409]
        run_id = client.get(f"/sessions/{sid}").json()["runs"][0]["run_id"]
        wait_for_run(client, sid, run_id, timeout=60)

    def test_unknown_run_404(self, client):
        sid = new_session(client)
        assert client.get(f"/sessions/{sid}/ga/run-77").status_code == 404


class TestPromoteAndRecommend:
    def completed_run(self, client):
        sid = new_session(client)
        client.post(f"/sessions/{sid}/preferences",
                    json={"params": [0.5, 0.4, 0.3], "score": 0.7})
        run_id = client.post(f"/sessions/{sid}/ga", json=GA_BODY).json()["run_id"]
        doc = wait_for_run(client, sid, run_id)
        return sid, run_id, doc

    def test_promote_appends_candidate_params(self, client):
        sid, run_id, doc = self.completed_run(client)
        cand = doc["generations"][-1]["candidates"][0]
        resp = client.post(f"/sessions/{sid}/ga/{run_id}/promote",
                           json={"candidate_id": cand["id"], "score": 0.9})
        table = resp.json()["preferences"]
        assert len(table) == 2
        assert table[1]["params_raw"] == cand["raw_params"]
        assert table[1]["score"] == 0.9

    def test_promote_latent_matches_candidate_evaluation(self, client, tiny_artifacts):
        sid, run_id, doc = self.completed_run(client)
        non_elite = next(c for c in doc["generations"][-1]["candidates"]
                         if not c["elite"])
        client.post(f"/sessions/{sid}/ga/{run_id}/promote",
                    json={"candidate_id": non_elite["id"], "score": 0.5})
        session_doc = client.get(f"/sessions/{sid}").json()
        stored = session_doc["preferences"][1]["latent_mean"]
        mean, _ = predict_latent_stats(
            tiny_artifacts["flow"], np.array(non_elite["params"]),
            GA_BODY["config"]["uq_samples"],
            seed=candidate_seed(GA_BODY["config"]["seed"], non_elite["id"]))
        assert stored == [float(v) for v in mean]

    def test_promote_idempotent(self, client):
        sid, run_id, doc = self.completed_run(client)
        cand = doc["generations"][-1]["candidates"][0]
        body = {"candidate_id": cand["id"], "score": 0.9}
        client.post(f"/sessions/{sid}/ga/{run_id}/promote", json=body)
        table = client.post(f"/sessions/{sid}/ga/{run_id}/promote",
                            json=body).json()["preferences"]
        assert len(table) == 2

    def test_promote_unknown_candidate_404(self, client):
        sid, run_id, _ = self.completed_run(client)
        resp = client.post(f"/sessions/{sid}/ga/{run_id}/promote",
                           json={"candidate_id": 10_000, "score": 0.5})
        assert resp.status_code == 404

    def test_promoted_params_included_in_next_run(self, client):
        sid, run_id, doc = self.completed_run(client)
        cand = doc["generations"][-1]["candidates"][0]
        client.post(f"/sessions/{sid}/ga/{run_id}/promote",
                    json={"candidate_id": cand["id"], "score": 0.9})
        run2 = client.post(f"/sessions/{sid}/ga", json=GA_BODY).json()["run_id"]
        wait_for_run(client, sid, run2)
        doc = client.get(f"/sessions/{sid}").json()
        assert len(doc["preferences"]) == 2

    def test_recommend_k1(self, client, tiny_artifacts):
        sid, run_id, _ = self.completed_run(client)
        resp = client.post(f"/sessions/{sid}/recommend",
                           json={"run_id": run_id, "k": 1})
        doc = resp.json()
        assert len(doc["recommendations"]) == 1
        assert len(doc["projection"]) == GA_BODY["config"]["population"]
        space = tiny_artifacts["dataset"].space
        for value, (lo, hi) in zip(doc["recommendations"][0]["params_raw"], space.ranges):
            assert lo - 1e-9 <= value <= hi + 1e-9

    def test_recommend_equals_direct_composition(self, client, tiny_artifacts):
        sid, run_id, _ = self.completed_run(client)
        resp = client.post(f"/sessions/{sid}/recommend",
                           json={"run_id": run_id, "k": 2})
        space = tiny_artifacts["dataset"].space
        prefs = [make_preference(tiny_artifacts["flow"], space, [0.5, 0.4, 0.3], 0.7,
                                 seed=SESSION_SEED)]
        records = optimize(GAConfig(**GA_BODY["config"]), prefs,
                           FitnessWeights(0.6, 0.3, -0.5), tiny_artifacts["flow"])
        expected = recommend_payload(tiny_artifacts["flow"], space, records[-1],
                                     2, seed=SESSION_SEED)
        assert canonical(resp.json()) == canonical(expected)

    def test_recommend_before_done_conflicts(self, client):
        sid = new_session(client)
        client.post(f"/sessions/{sid}/preferences",
                    json={"params": [0.5, 0.4, 0.3], "score": 0.7})
        long_body = {"config": {"population": 12, "generations": 150, "uq_samples": 4,
                                "seed": 2}, "weights": {"w1": 1, "w2": 0, "w3": 0}}
        run_id = client.post(f"/sessions/{sid}/ga", json=long_body).json()["run_id"]
        resp = client.post(f"/sessions/{sid}/recommend", json={"run_id": run_id, "k": 1})
        assert resp.status_code in (200, 409)  # 409 unless the run already finished
        wait_for_run(client, sid, run_id, timeout=60)


class TestReverse:
    def field_bytes(self, tiny_artifacts, index=0):
        return tiny_artifacts["dataset"].fields[index].astype("<f4").tobytes()

    def test_round_trips_and_is_deterministic(self, client, tiny_artifacts):
        sid = new_session(client)
        payload = self.field_bytes(tiny_artifacts)
        a = client.post(f"/sessions/{sid}/reverse", content=payload)
        b = client.post(f"/sessions/{sid}/reverse", content=payload)
        assert a.status_code == 200
        assert a.content == b.content
        doc = a.json()
        assert len(doc["params_raw"]) == 3
        assert all(0.0 <= v <= 1.0 for v in doc["params_normalized"])

    def test_equals_direct_library_call(self, client, tiny_artifacts):
        sid = new_session(client)
        ds = tiny_artifacts["dataset"]
        resp = client.post(f"/sessions/{sid}/reverse", content=self.field_bytes(tiny_artifacts, 1))
        expected = reverse_payload(tiny_artifacts["flow"], tiny_artifacts["ae"],
                                   ds.space, ds.field(1))
        assert canonical(resp.json()) == canonical(expected)

    def test_malformed_payload_rejected_session_unchanged(self, client):
        sid = new_session(client)
        before = client.get(f"/sessions/{sid}").json()
        resp = client.post(f"/sessions/{sid}/reverse", content=b"\x00" * 13)
        assert resp.status_code == 422
        after = client.get(f"/sessions/{sid}").json()
        assert canonical(before) == canonical(after)


class TestPersistence:
    def test_sessions_survive_restart(self, tiny_artifacts, tmp_path):
        state = tmp_path / "state"
        app = create_app(tiny_artifacts["workspace"], state)
        with TestClient(app) as client:
            sid = new_session(client)
            client.post(f"/sessions/{sid}/preferences",
                        json={"params": [0.5, 0.4, 0.3], "score": 0.7})
            run_id = client.post(f"/sessions/{sid}/ga", json=GA_BODY).json()["run_id"]
            wait_for_run(client, sid, run_id)
            before_session = client.get(f"/sessions/{sid}").json()
            before_run = client.get(f"/sessions/{sid}/ga/{run_id}").json()
            before_rec = client.post(f"/sessions/{sid}/recommend",
                                     json={"run_id": run_id, "k": 2}).json()

        app2 = create_app(tiny_artifacts["workspace"], state)
        with TestClient(app2) as client2:
            after_session = client2.get(f"/sessions/{sid}").json()
            after_run = client2.get(f"/sessions/{sid}/ga/{run_id}").json()
            after_rec = client2.post(f"/sessions/{sid}/recommend",
                                     json={"run_id": run_id, "k": 2}).json()
            assert canonical(before_session) == canonical(after_session)
            assert canonical(before_run) == canonical(after_run)
            # restored latents are recomputed through the per-candidate seeds,
            # so even clustering output is identical
            assert canonical(before_rec) == canonical(after_rec)

    def test_interrupted_run_marked_failed(self, tiny_artifacts, tmp_path):
        import json as json_mod

        state = tmp_path / "state"
        app = create_app(tiny_artifacts["workspace"], state)
        with TestClient(app) as client:
            sid = new_session(client)
            client.post(f"/sessions/{sid}/preferences",
                        json={"params": [0.5, 0.4, 0.3], "score": 0.7})
            run_id = client.post(f"/sessions/{sid}/ga", json=GA_BODY).json()["run_id"]
            wait_for_run(client, sid, run_id)
        # forge a stale "running" state on disk, as if the service died mid-run
        path = state / f"session_{sid}.json"
        doc = json_mod.loads(path.read_text())
        doc["runs"][0]["status"] = "running"
        path.write_text(json_mod.dumps(doc))
        app2 = create_app(tiny_artifacts["workspace"], state)
        with TestClient(app2) as client2:
            run_doc = client2.get(f"/sessions/{sid}/ga/{run_id}").json()
            assert run_doc["status"] == "failed"
            assert "restart" in run_doc["error"]

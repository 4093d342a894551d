"""Gateway contract: envelopes, pass-through equivalence with the engine,
alert cursors, persistence, and crash recovery."""

import json

import pytest
from fastapi.testclient import TestClient

from sentinel.api import GatewayConfig, create_app
from sentinel.engine import AgentEngine, EngineConfig
from sentinel.schema import (BINARY, NUMERIC, ORDINAL, FeatureDef,
                             FeatureSchema, IncidentLabel, SurveyRecord)
from sentinel.scoring import BlendPolicy, HeuristicModel, LearnedModel, ModelBundle


def small_schema():
    return FeatureSchema(features=(
        FeatureDef("risk_a", BINARY), FeatureDef("risk_b", BINARY),
        FeatureDef("exposure", ORDINAL, arity=4),
        FeatureDef("distance", NUMERIC, lo=0.0, hi=10.0)))


def gateway_config(tmp_path, **kw):
    defaults = dict(data_dir=tmp_path / "data", schema=small_schema(),
                    theta=0.55, policy=BlendPolicy(floor_labels=0, n0=3),
                    engine=EngineConfig(retrain_epochs=20, retrain_lr=0.5),
                    base_seed=1234)
    defaults.update(kw)
    return GatewayConfig(**defaults)


def make_client(tmp_path, **kw):
    return TestClient(create_app(gateway_config(tmp_path, **kw)))


def direct_engine():
    models = ModelBundle(
        heuristic=HeuristicModel.uniform(4, theta=0.55),
        learned=LearnedModel.zeros(4),
        policy=BlendPolicy(floor_labels=0, n0=3))
    return AgentEngine("agent-1", small_schema(), models, base_seed=1234,
                       config=EngineConfig(retrain_epochs=20, retrain_lr=0.5))


SUBJECTS = [
    ("s01", "locA", (1.0, 1.0, 3.0, 8.0), 1),
    ("s02", "locA", (0.0, 0.0, 0.0, 1.0), 2),
    ("s03", "locA", (1.0, 0.0, 2.0, 5.0), 3),
    ("s04", "locA", (0.0, 1.0, 1.0, 3.0), 4),
]


def enroll_payload(sid, loc, vals, t, rid=None):
    body = {"record": {"subject_id": sid, "locality_id": loc,
                       "values": list(vals), "collected_at": t}}
    if rid:
        body["request_id"] = rid
    return body


def test_envelope_echoes_request_id(tmp_path):
    client = make_client(tmp_path)
    r = client.post("/agents/agent-1/enroll",
                    json=enroll_payload(*SUBJECTS[0], rid="my-req-1"))
    assert r.status_code == 200
    body = r.json()
    assert body["request_id"] == "my-req-1"
    assert body["agent_id"] == "agent-1"
    assert body["operation"] == "enroll"
    assert 0.0 <= body["result"]["prediction"]["score"] <= 1.0


def test_enroll_then_get_prediction_matches_direct_engine(tmp_path):
    client = make_client(tmp_path)
    eng = direct_engine()
    for sub in SUBJECTS:
        r = client.post("/agents/agent-1/enroll", json=enroll_payload(*sub))
        assert r.status_code == 200
        pred_direct, _ = eng.enroll(SurveyRecord(sub[0], sub[1], sub[2], sub[3]))
        assert r.json()["result"]["prediction"]["score"] == pred_direct.score
    r = client.get("/agents/agent-1/predictions/s03")
    assert r.json()["result"]["prediction"]["score"] == \
        eng.prediction_cache["s03"].score


def test_incident_flip_shows_in_alert_feed(tmp_path):
    client = make_client(tmp_path)
    for sub in SUBJECTS:
        client.post("/agents/agent-1/enroll", json=enroll_payload(*sub))
    before = client.get("/agents/agent-1/alerts").json()["result"]
    r = client.post("/agents/agent-1/incidents", json={
        "label": {"subject_id": "s01", "outcome": "trafficked",
                  "observed_at": 10}})
    assert r.status_code == 200
    flips = r.json()["result"]["alerts"]
    after = client.get("/agents/agent-1/alerts",
                       params={"since": before["cursor"]}).json()["result"]
    assert [a["alert_id"] for a in after["alerts"]] == \
        [a["alert_id"] for a in flips]
    assert all(a["kind"] == "ENTERED_DANGER_ZONE" for a in after["alerts"])


def test_alert_cursor_never_skips_or_duplicates(tmp_path):
    client = make_client(tmp_path)
    for sub in SUBJECTS:
        client.post("/agents/agent-1/enroll", json=enroll_payload(*sub))
    incidents = [("s01", "trafficked", 10), ("s03", "confirmed-safe", 11),
                 ("s02", "confirmed-safe", 12)]
    seen = []
    cursor = 0
    for sid, outcome, t in incidents:
        client.post("/agents/agent-1/incidents", json={
            "label": {"subject_id": sid, "outcome": outcome,
                      "observed_at": t}})
        res = client.get("/agents/agent-1/alerts",
                         params={"since": cursor}).json()["result"]
        seen.extend(a["alert_id"] for a in res["alerts"])
        cursor = res["cursor"]
    full = client.get("/agents/agent-1/alerts").json()["result"]
    assert seen == [a["alert_id"] for a in full["alerts"]]
    assert len(seen) == len(set(seen))


def test_error_envelope_names_offending_feature(tmp_path):
    client = make_client(tmp_path)
    r = client.post("/agents/agent-1/enroll",
                    json=enroll_payload("sX", "locA", (1.0, 1.0, 9.0, 8.0), 1))
    assert r.status_code == 422
    err = r.json()["error"]
    assert err["code"] == "RANGE_VIOLATION"
    assert err["field"] == "exposure"
    # failed enroll left nothing behind
    r2 = client.get("/agents/agent-1/predictions/sX")
    assert r2.status_code == 404
    assert r2.json()["error"]["code"] == "UNKNOWN_SUBJECT"


def test_unknown_subject_incident(tmp_path):
    client = make_client(tmp_path)
    r = client.post("/agents/agent-1/incidents", json={
        "label": {"subject_id": "ghost", "outcome": "trafficked",
                  "observed_at": 1}})
    assert r.status_code == 404
    assert r.json()["error"]["code"] == "UNKNOWN_SUBJECT"


def test_schema_endpoint(tmp_path):
    client = make_client(tmp_path)
    r = client.get("/schema")
    feats = r.json()["result"]["features"]
    assert [f["id"] for f in feats] == ["risk_a", "risk_b", "exposure",
                                        "distance"]


def test_peers_and_views(tmp_path):
    client = make_client(tmp_path)
    for i in range(8):
        vals = (float(i % 2), 0.0, float(i % 4), float(i))
        client.post("/agents/agent-1/enroll",
                    json=enroll_payload(f"p{i}", "locA", vals, i))
    peers = client.get("/agents/agent-1/peers/p0",
                       params={"top": 3}).json()["result"]["peers"]
    assert len(peers) == 3
    assert all(p["subject_id"] != "p0" for p in peers)

    view = client.get("/agents/agent-1/cluster-view",
                      params={"clusters": 3}).json()["result"]
    assert not view["insufficient"]
    assert len(view["subjects"]) == 8
    assert {s["cluster"] for s in view["subjects"]} == {0, 1, 2}

    sim = client.get("/agents/agent-1/similarity-stats").json()["result"]
    assert not sim["insufficient"]
    assert sum(b["count"] for b in sim["histogram"]) == 8 * 7 // 2


def test_views_insufficient_states(tmp_path):
    client = make_client(tmp_path)
    view = client.get("/agents/agent-1/cluster-view").json()["result"]
    assert view["insufficient"]
    sim = client.get("/agents/agent-1/similarity-stats").json()["result"]
    assert sim["insufficient"]


def test_api_engine_equivalence_digest(tmp_path):
    client = make_client(tmp_path)
    eng = direct_engine()
    for sub in SUBJECTS:
        client.post("/agents/agent-1/enroll", json=enroll_payload(*sub))
        eng.enroll(SurveyRecord(sub[0], sub[1], sub[2], sub[3]))
    for sid, outcome, t in [("s01", "trafficked", 10),
                            ("s04", "confirmed-safe", 11)]:
        client.post("/agents/agent-1/incidents", json={
            "label": {"subject_id": sid, "outcome": outcome,
                      "observed_at": t}})
        eng.report_incident(IncidentLabel(sid, outcome, t))
    via_api = client.get("/agents/agent-1/snapshot").json()["result"]
    assert via_api["digest"] == eng.digest()


def test_crash_recovery_same_data_dir(tmp_path):
    client = make_client(tmp_path)
    for sub in SUBJECTS:
        client.post("/agents/agent-1/enroll", json=enroll_payload(*sub))
    client.post("/agents/agent-1/incidents", json={
        "label": {"subject_id": "s01", "outcome": "trafficked",
                  "observed_at": 10}})
    digest = client.get("/agents/agent-1/snapshot").json()["result"]["digest"]
    preds = {sid: client.get(f"/agents/agent-1/predictions/{sid}").json()
             for sid, *_ in SUBJECTS}
    del client

    revived = make_client(tmp_path)
    assert revived.get("/agents/agent-1/snapshot").json()["result"]["digest"] \
        == digest
    for sid, *_ in SUBJECTS:
        again = revived.get(f"/agents/agent-1/predictions/{sid}").json()
        assert again["result"] == preds[sid]["result"]


def test_restore_endpoint_roundtrip(tmp_path):
    client = make_client(tmp_path)
    for sub in SUBJECTS:
        client.post("/agents/agent-1/enroll", json=enroll_payload(*sub))
    snap = client.get("/agents/agent-1/snapshot").json()["result"]

    other_dir = tmp_path / "other"
    fresh = make_client(other_dir)
    r = fresh.post("/agents/agent-1/restore",
                   json={"snapshot": snap["snapshot"]})
    assert r.status_code == 200
    assert r.json()["result"]["digest"] == snap["digest"]
    pred = fresh.get("/agents/agent-1/predictions/s01")
    assert pred.status_code == 200


def test_restore_rejects_corrupt_and_mismatched(tmp_path):
    client = make_client(tmp_path)
    client.post("/agents/agent-1/enroll", json=enroll_payload(*SUBJECTS[0]))
    snap = client.get("/agents/agent-1/snapshot").json()["result"]["snapshot"]
    snap["state"]["agent_id"] = "agent-2"  # checksum now stale
    r = client.post("/agents/agent-1/restore", json={"snapshot": snap})
    assert r.status_code == 422
    assert r.json()["error"]["code"] == "CORRUPT_SNAPSHOT"


def test_storage_failure_rolls_back(tmp_path, monkeypatch):
    app = create_app(gateway_config(tmp_path))
    client = TestClient(app)
    client.post("/agents/agent-1/enroll", json=enroll_payload(*SUBJECTS[0]))
    digest_before = client.get(
        "/agents/agent-1/snapshot").json()["result"]["digest"]

    def boom(engine):
        raise OSError("disk full")

    monkeypatch.setattr(app.state.store, "persist", boom)
    r = client.post("/agents/agent-1/enroll", json=enroll_payload(*SUBJECTS[1]))
    assert r.status_code == 500
    monkeypatch.undo()
    assert client.get(
        "/agents/agent-1/snapshot").json()["result"]["digest"] == digest_before
    assert client.get("/agents/agent-1/predictions/s02").status_code == 404


def test_agents_are_independent(tmp_path):
    client = make_client(tmp_path)
    client.post("/agents/a1/enroll", json=enroll_payload(*SUBJECTS[0]))
    client.post("/agents/a2/enroll", json=enroll_payload(*SUBJECTS[1]))
    assert client.get("/agents/a1/predictions/s02").status_code == 404
    assert client.get("/agents/a2/predictions/s01").status_code == 404

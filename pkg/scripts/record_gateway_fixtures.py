#!/usr/bin/env python3
"""Record real gateway responses as JSON fixtures for the console's contract
tests. Reruns produce identical files (fixed seeds, fixed request ids).

Usage: python3 scripts/record_gateway_fixtures.py [out_dir]
"""

import json
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, "src")

from fastapi.testclient import TestClient

from sentinel.api import GatewayConfig, create_app
from sentinel.engine import EngineConfig
from sentinel.schema import BINARY, NUMERIC, ORDINAL, FeatureDef, FeatureSchema
from sentinel.scoring import BlendPolicy

OUT = Path(sys.argv[1] if len(sys.argv) > 1 else "frontend/tests/fixtures")

SCHEMA = FeatureSchema(features=(
    FeatureDef("risk_a", BINARY, display_name="risk a"),
    FeatureDef("risk_b", BINARY, display_name="risk b"),
    FeatureDef("exposure", ORDINAL, arity=4, display_name="exposure"),
    FeatureDef("distance", NUMERIC, lo=0.0, hi=10.0,
               display_name="distance")))

SUBJECTS = [
    ("s01", "locA", [1.0, 1.0, 3.0, 8.0], 1),
    ("s02", "locA", [0.0, 0.0, 0.0, 1.0], 2),
    ("s03", "locA", [1.0, 0.0, 2.0, 5.0], 3),
    ("s04", "locA", [0.0, 1.0, 1.0, 3.0], 4),
]


def record(name: str, response) -> dict:
    body = response.json()
    path = OUT / f"{name}.json"
    path.write_text(json.dumps(
        {"status": response.status_code, "body": body},
        indent=2, sort_keys=True) + "\n")
    print(f"recorded {path} ({response.status_code})")
    return body


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        config = GatewayConfig(
            data_dir=Path(tmp), schema=SCHEMA, theta=0.55,
            policy=BlendPolicy(floor_labels=0, n0=3),
            engine=EngineConfig(retrain_epochs=20, retrain_lr=0.5),
            base_seed=1234)
        client = TestClient(create_app(config))

        record("schema", client.get("/schema"))
        for i, (sid, loc, vals, t) in enumerate(SUBJECTS):
            record(f"enroll_{sid}", client.post(
                "/agents/agent-1/enroll",
                json={"request_id": f"fix-enroll-{i}",
                      "record": {"subject_id": sid, "locality_id": loc,
                                 "values": vals, "collected_at": t}}))
        record("enroll_invalid", client.post(
            "/agents/agent-1/enroll",
            json={"request_id": "fix-bad",
                  "record": {"subject_id": "bad", "locality_id": "locA",
                             "values": [1.0, 1.0, 9.0, 8.0],
                             "collected_at": 9}}))
        record("alerts_empty", client.get("/agents/agent-1/alerts",
                                          params={"since": 0}))
        record("incident_flip", client.post(
            "/agents/agent-1/incidents",
            json={"request_id": "fix-incident-1",
                  "label": {"subject_id": "s01", "outcome": "trafficked",
                            "observed_at": 10}}))
        record("alerts_after_flip", client.get(
            "/agents/agent-1/alerts", params={"since": 0}))
        record("incident_unknown", client.post(
            "/agents/agent-1/incidents",
            json={"request_id": "fix-incident-x",
                  "label": {"subject_id": "ghost", "outcome": "trafficked",
                            "observed_at": 11}}))
        record("prediction_s04", client.get(
            "/agents/agent-1/predictions/s04"))
        record("peers_s03", client.get("/agents/agent-1/peers/s03",
                                       params={"top": 3}))
        record("cluster_view", client.get(
            "/agents/agent-1/cluster-view", params={"clusters": 2}))
        record("similarity_stats", client.get(
            "/agents/agent-1/similarity-stats"))

    # second scenario (agent-2, 8 subjects, theta 0.6 so the first incident
    # flips exactly one subject): the shape the console round-trip test needs
    with tempfile.TemporaryDirectory() as tmp:
        config2 = GatewayConfig(
            data_dir=Path(tmp), schema=SCHEMA, theta=0.6,
            policy=BlendPolicy(floor_labels=0, n0=3),
            engine=EngineConfig(retrain_epochs=20, retrain_lr=0.5),
            base_seed=1234)
        client2 = TestClient(create_app(config2))
        eight = SUBJECTS + [
            ("s05", "locB", [1.0, 1.0, 2.0, 9.0], 5),
            ("s06", "locB", [0.0, 0.0, 1.0, 2.0], 6),
            ("s07", "locB", [1.0, 0.0, 3.0, 6.0], 7),
            ("s08", "locB", [0.0, 1.0, 0.0, 4.0], 8),
        ]
        for i, (sid, loc, vals, t) in enumerate(eight):
            record(f"a2_enroll_{sid}", client2.post(
                "/agents/agent-2/enroll",
                json={"request_id": f"fix2-enroll-{i}",
                      "record": {"subject_id": sid, "locality_id": loc,
                                 "values": vals, "collected_at": t}}))
        record("a2_alerts_empty", client2.get("/agents/agent-2/alerts",
                                              params={"since": 0}))
        flip = record("a2_incident_one_flip", client2.post(
            "/agents/agent-2/incidents",
            json={"request_id": "fix2-incident-1",
                  "label": {"subject_id": "s01", "outcome": "trafficked",
                            "observed_at": 10}}))
        assert len(flip["result"]["alerts"]) == 1, "expected a one-flip fixture"
        record("a2_alerts_after_flip", client2.get(
            "/agents/agent-2/alerts", params={"since": 0}))
        record("a2_prediction_s03", client2.get(
            "/agents/agent-2/predictions/s03"))


if __name__ == "__main__":
    main()

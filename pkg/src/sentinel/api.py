"""JSON-over-HTTP gateway in front of the agent engines and analytics.

Every mutating call persists the agent snapshot (atomic write) before
acknowledging; a storage failure rolls the in-memory engine back to the last
persisted state, so responses never reflect unpersisted mutations. Mutations
for one agent are serialized by a per-agent lock; reads serve the latest
committed state.
"""

from __future__ import annotations

import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .analytics import (cut_tree, min_components_for, pca, project,
                        similarity_stats, ward_cluster)
from .engine import AgentEngine, EngineConfig
from .errors import (BadK, CorruptSnapshot, InsufficientData, RangeViolation,
                     SchemaMismatch, SentinelError, StorageFailure,
                     UnknownSubject)
from .schema import (Dataset, FeatureSchema, IncidentLabel, SurveyRecord,
                     default_schema, normalize_matrix)
from .scoring import BlendPolicy, ModelBundle

DATA_DIR_ENV = "SENTINEL_DATA_DIR"

_ERROR_CODES = {
    RangeViolation: ("RANGE_VIOLATION", 422),
    SchemaMismatch: ("SCHEMA_MISMATCH", 422),
    UnknownSubject: ("UNKNOWN_SUBJECT", 404),
    InsufficientData: ("INSUFFICIENT_DATA", 409),
    CorruptSnapshot: ("CORRUPT_SNAPSHOT", 422),
    BadK: ("BAD_CLUSTER_COUNT", 422),
    StorageFailure: ("STORAGE_FAILURE", 500),
}


@dataclass
class GatewayConfig:
    data_dir: Path
    schema: FeatureSchema = field(default_factory=default_schema)
    theta: float = 0.5
    policy: BlendPolicy = field(default_factory=BlendPolicy)
    engine: EngineConfig = field(default_factory=EngineConfig)
    base_seed: int = 0
    model_file: Path | None = None

    @classmethod
    def from_env(cls, **overrides) -> "GatewayConfig":
        data_dir = overrides.pop("data_dir", None) or os.environ.get(
            DATA_DIR_ENV, "./sentinel-data")
        return cls(data_dir=Path(data_dir), **overrides)


class AgentStore:
    """Engines keyed by agent id, persisted one JSON snapshot per agent."""

    def __init__(self, config: GatewayConfig):
        self.config = config
        self.root = Path(config.data_dir) / "agents"
        self.root.mkdir(parents=True, exist_ok=True)
        self._engines: dict[str, AgentEngine] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def _path(self, agent_id: str) -> Path:
        safe = "".join(c if c.isalnum() or c in "-_" else "_"
                       for c in agent_id)
        return self.root / f"{safe}.json"

    def lock(self, agent_id: str) -> threading.Lock:
        with self._registry_lock:
            if agent_id not in self._locks:
                self._locks[agent_id] = threading.Lock()
            return self._locks[agent_id]

    def _fresh_engine(self, agent_id: str) -> AgentEngine:
        if self.config.model_file is not None:
            bundle = ModelBundle.load(self.config.model_file)
        else:
            bundle = ModelBundle.fresh(len(self.config.schema),
                                       theta=self.config.theta,
                                       policy=self.config.policy)
        return AgentEngine(agent_id, self.config.schema, bundle,
                           base_seed=self.config.base_seed,
                           config=EngineConfig.from_json(
                               self.config.engine.to_json()))

    def get_or_create(self, agent_id: str) -> AgentEngine:
        if agent_id in self._engines:
            return self._engines[agent_id]
        path = self._path(agent_id)
        if path.exists():
            engine = AgentEngine.restore_json(path.read_text())
        else:
            engine = self._fresh_engine(agent_id)
        self._engines[agent_id] = engine
        return engine

    def persist(self, engine: AgentEngine) -> None:
        path = self._path(engine.agent_id)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(engine.snapshot_json())
        os.replace(tmp, path)

    def replace(self, engine: AgentEngine) -> None:
        self._engines[engine.agent_id] = engine


def _request_id(body: dict | None, request: Request) -> str:
    if body and isinstance(body.get("request_id"), str):
        return body["request_id"]
    header = request.headers.get("x-request-id")
    return header or f"req-{uuid.uuid4().hex[:12]}"


def create_app(config: GatewayConfig) -> FastAPI:
    app = FastAPI(title="sentinel gateway", docs_url=None, redoc_url=None)
    store = AgentStore(config)
    app.state.store = store

    def envelope(request_id: str, agent_id: str | None, operation: str,
                 result: dict, status: int = 200) -> JSONResponse:
        return JSONResponse({"request_id": request_id, "agent_id": agent_id,
                             "operation": operation, "result": result},
                            status_code=status)

    def error_envelope(request_id: str, agent_id: str | None, operation: str,
                       exc: Exception) -> JSONResponse:
        code, status = _ERROR_CODES.get(type(exc), ("INTERNAL_ERROR", 500))
        field_name = getattr(exc, "feature_id", None) or getattr(
            exc, "location", None)
        return JSONResponse(
            {"request_id": request_id, "agent_id": agent_id,
             "operation": operation,
             "error": {"code": code, "message": str(exc),
                       "field": field_name}},
            status_code=status)

    async def read_body(request: Request) -> dict:
        try:
            body = await request.json()
        except Exception:
            return {}
        return body if isinstance(body, dict) else {}

    def mutate(agent_id: str, op):
        """Run a mutating operation under the agent lock; persist before
        acknowledging, rolling back on storage failure."""
        with store.lock(agent_id):
            engine = store.get_or_create(agent_id)
            backup = engine.snapshot_json()
            result = op(engine)  # engine ops validate before mutating
            try:
                store.persist(engine)
            except OSError as exc:
                store.replace(AgentEngine.restore_json(backup))
                raise StorageFailure(
                    f"snapshot write failed, mutation rolled back: {exc}"
                ) from exc
            return result

    @app.get("/schema")
    async def get_schema(request: Request):
        rid = _request_id(None, request)
        return envelope(rid, None, "schema", config.schema.to_json())

    @app.post("/agents/{agent_id}/enroll")
    async def enroll(agent_id: str, request: Request):
        body = await read_body(request)
        rid = _request_id(body, request)
        try:
            record = SurveyRecord.from_json(body["record"])
        except (KeyError, TypeError, ValueError) as exc:
            return error_envelope(rid, agent_id, "enroll",
                                  SchemaMismatch(f"bad record payload: {exc}"))
        try:
            pred, alert = mutate(agent_id,
                                 lambda eng: eng.enroll(record))
        except SentinelError as exc:
            return error_envelope(rid, agent_id, "enroll", exc)
        result = {"prediction": pred.to_json(),
                  "outlier_alert": alert.to_json() if alert else None}
        return envelope(rid, agent_id, "enroll", result)

    @app.post("/agents/{agent_id}/incidents")
    async def report_incident(agent_id: str, request: Request):
        body = await read_body(request)
        rid = _request_id(body, request)
        try:
            label = IncidentLabel.from_json(body["label"])
        except (KeyError, TypeError, ValueError) as exc:
            return error_envelope(rid, agent_id, "report_incident",
                                  SchemaMismatch(f"bad label payload: {exc}"))
        try:
            alerts = mutate(agent_id,
                            lambda eng: eng.report_incident(label))
        except SentinelError as exc:
            return error_envelope(rid, agent_id, "report_incident", exc)
        engine = store.get_or_create(agent_id)
        result = {"alerts": [a.to_json() for a in alerts],
                  "model_version": engine.models.learned.version,
                  "trained_on": engine.models.learned.trained_on}
        return envelope(rid, agent_id, "report_incident", result)

    @app.get("/agents/{agent_id}/predictions/{subject_id}")
    async def get_prediction(agent_id: str, subject_id: str, request: Request):
        rid = _request_id(None, request)
        engine = store.get_or_create(agent_id)
        try:
            pred = engine.prediction_for(subject_id)
        except SentinelError as exc:
            return error_envelope(rid, agent_id, "get_prediction", exc)
        return envelope(rid, agent_id, "get_prediction",
                        {"prediction": pred.to_json()})

    @app.get("/agents/{agent_id}/alerts")
    async def list_alerts(agent_id: str, request: Request, since: int = 0):
        rid = _request_id(None, request)
        engine = store.get_or_create(agent_id)
        alerts = engine.alerts_since(since)
        cursor = alerts[-1].alert_id if alerts else since
        return envelope(rid, agent_id, "list_alerts",
                        {"alerts": [a.to_json() for a in alerts],
                         "cursor": cursor})

    @app.get("/agents/{agent_id}/peers/{subject_id}")
    async def safety_peers(agent_id: str, subject_id: str, request: Request,
                           top: int = 5):
        rid = _request_id(None, request)
        engine = store.get_or_create(agent_id)
        try:
            peers = engine.safety_peers(subject_id, top)
        except SentinelError as exc:
            return error_envelope(rid, agent_id, "safety_peers", exc)
        return envelope(rid, agent_id, "safety_peers",
                        {"peers": [{"subject_id": s, "similarity": v}
                                   for s, v in peers]})

    @app.get("/agents/{agent_id}/cluster-view")
    async def cluster_view(agent_id: str, request: Request, clusters: int = 7):
        rid = _request_id(None, request)
        engine = store.get_or_create(agent_id)
        ds = engine.dataset()
        if len(ds.records) < 2:
            return envelope(rid, agent_id, "cluster_view",
                            {"insufficient": True, "subjects": []})
        try:
            X = normalize_matrix(ds.records, engine.schema)
            fit = pca(X)
            k_dims = max(2, min_components_for(0.85, fit)) \
                if not fit.degenerate else 2
            k_dims = min(k_dims, fit.n_features)
            pts = project(X, fit, k_dims)
            tree = ward_cluster(pts)
            k = max(1, min(clusters, len(ds.records)))
            labels = cut_tree(tree, k)
        except SentinelError as exc:
            return error_envelope(rid, agent_id, "cluster_view", exc)
        subjects = [{"subject_id": r.subject_id,
                     "x": float(pts[i, 0]),
                     "y": float(pts[i, 1]) if pts.shape[1] > 1 else 0.0,
                     "cluster": int(labels[i]),
                     "vulnerable": engine.prediction_cache[
                         r.subject_id].vulnerable}
                    for i, r in enumerate(ds.records)]
        return envelope(rid, agent_id, "cluster_view",
                        {"insufficient": False, "subjects": subjects,
                         "pca_dims": k_dims, "clusters": k})

    @app.get("/agents/{agent_id}/similarity-stats")
    async def similarity_view(agent_id: str, request: Request):
        rid = _request_id(None, request)
        engine = store.get_or_create(agent_id)
        ds = engine.dataset()
        if len(ds.records) < 2:
            return envelope(rid, agent_id, "similarity_stats",
                            {"insufficient": True})
        stats = similarity_stats(ds)
        return envelope(rid, agent_id, "similarity_stats", {
            "insufficient": False,
            "n_records": stats.n_records,
            "duplicate_partner_fraction": stats.duplicate_partner_fraction,
            "low_similarity_pair_fraction":
                stats.low_similarity_pair_fraction(0.70),
            "histogram": [{"lo": lo, "hi": hi, "count": c}
                          for lo, hi, c in stats.histogram()]})

    @app.get("/agents/{agent_id}/snapshot")
    async def get_snapshot(agent_id: str, request: Request):
        rid = _request_id(None, request)
        engine = store.get_or_create(agent_id)
        return envelope(rid, agent_id, "snapshot",
                        {"snapshot": engine.snapshot(),
                         "digest": engine.digest()})

    @app.post("/agents/{agent_id}/restore")
    async def restore_snapshot(agent_id: str, request: Request):
        body = await read_body(request)
        rid = _request_id(body, request)
        try:
            engine = AgentEngine.restore(body.get("snapshot"))
        except SentinelError as exc:
            return error_envelope(rid, agent_id, "restore", exc)
        if engine.agent_id != agent_id:
            return error_envelope(
                rid, agent_id, "restore",
                SchemaMismatch(f"snapshot belongs to {engine.agent_id!r}"))
        with store.lock(agent_id):
            store.replace(engine)
            store.persist(engine)
        return envelope(rid, agent_id, "restore", {"digest": engine.digest()})

    return app

"""Per-agent stateful core: subject registry, prediction cache, retrain
orchestration, prediction diffing, and alert emission.

One logical writer per engine; every mutating call leaves the state
internally consistent (the prediction cache always covers the registry and is
swapped atomically at retrain). Snapshots are canonical JSON guarded by a
checksum, so restores are all-or-nothing and bit-identical.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .analytics import OutlierCheck, locality_outlier_check, similarity
from .errors import CorruptSnapshot, UnknownSubject
from .schema import (Dataset, FeatureSchema, IncidentLabel, SurveyRecord,
                     normalize)
from .scoring import (BlendPolicy, HeuristicModel, LearnedModel, ModelBundle,
                      Prediction, retrain, score_blended)

log = logging.getLogger(__name__)

ALERT_DANGER = "ENTERED_DANGER_ZONE"
ALERT_OUTLIER = "LOCALITY_OUTLIER"

SNAPSHOT_FORMAT = 1


@dataclass(frozen=True)
class AlertEvent:
    alert_id: int
    kind: str
    subject_id: str
    detail: dict
    model_version: int
    timestamp: int

    def to_json(self) -> dict:
        return {"alert_id": self.alert_id, "kind": self.kind,
                "subject_id": self.subject_id, "detail": self.detail,
                "model_version": self.model_version, "timestamp": self.timestamp}

    @classmethod
    def from_json(cls, obj: dict) -> "AlertEvent":
        return cls(alert_id=int(obj["alert_id"]), kind=obj["kind"],
                   subject_id=obj["subject_id"], detail=obj["detail"],
                   model_version=int(obj["model_version"]),
                   timestamp=int(obj["timestamp"]))


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=True)


@dataclass
class EngineConfig:
    retrain_epochs: int = 30
    retrain_lr: float = 0.5
    # minimum logical-time gap between retrains; 0 retrains on every incident
    min_retrain_interval: int = 0

    def to_json(self) -> dict:
        return {"retrain_epochs": self.retrain_epochs,
                "retrain_lr": self.retrain_lr,
                "min_retrain_interval": self.min_retrain_interval}

    @classmethod
    def from_json(cls, obj: dict) -> "EngineConfig":
        return cls(retrain_epochs=int(obj["retrain_epochs"]),
                   retrain_lr=float(obj["retrain_lr"]),
                   min_retrain_interval=int(obj["min_retrain_interval"]))


class AgentEngine:
    """State and operations for one field agent's on-device decision support."""

    def __init__(self, agent_id: str, schema: FeatureSchema,
                 models: ModelBundle | None = None, base_seed: int = 0,
                 config: EngineConfig | None = None):
        self.agent_id = agent_id
        self.schema = schema
        self.models = models or ModelBundle.fresh(len(schema))
        self.base_seed = int(base_seed)
        self.config = config or EngineConfig()
        self.registry: dict[str, SurveyRecord] = {}
        self.label_store: list[IncidentLabel] = []
        self.prediction_cache: dict[str, Prediction] = {}
        self.alert_log: list[AlertEvent] = []
        self._next_alert_id = 1
        self._last_retrain_at: int | None = None

    # -- scoring helpers ------------------------------------------------

    def _predict(self, record: SurveyRecord) -> Prediction:
        x = normalize(record, self.schema)
        return score_blended(x, self.models.heuristic, self.models.learned,
                             self.models.policy, subject_id=record.subject_id)

    def _emit(self, kind: str, subject_id: str, detail: dict,
              timestamp: int) -> AlertEvent:
        alert = AlertEvent(alert_id=self._next_alert_id, kind=kind,
                           subject_id=subject_id, detail=detail,
                           model_version=self.models.learned.version,
                           timestamp=timestamp)
        self._next_alert_id += 1
        self.alert_log.append(alert)
        return alert

    def _locality_peers(self, subject_id: str, locality_id: str
                        ) -> list[SurveyRecord]:
        return [r for sid, r in sorted(self.registry.items())
                if sid != subject_id and r.locality_id == locality_id]

    # -- operations --------------------------------------------------------

    def enroll(self, record: SurveyRecord
               ) -> tuple[Prediction, AlertEvent | None]:
        """Register or refresh a subject, cache its blended prediction, and
        flag locality deviations.

        A record older than the one on file leaves the registry untouched;
        re-enrolling an identical (subject, collected_at) record is a no-op
        returning the cached prediction.
        """
        normalize(record, self.schema)  # validate before touching state
        existing = self.registry.get(record.subject_id)
        if existing is not None:
            if existing == record:
                return self.prediction_cache[record.subject_id], None
            if record.collected_at < existing.collected_at:
                return self.prediction_cache[record.subject_id], None
        self.registry[record.subject_id] = record
        pred = self._predict(record)
        self.prediction_cache[record.subject_id] = pred

        alert = None
        peers = self._locality_peers(record.subject_id, record.locality_id)
        check: OutlierCheck = locality_outlier_check(record, peers, self.schema)
        if check.flagged:
            detail = {"features": [{"feature_id": fid, "deviation": dev}
                                   for fid, dev in check.flags]}
            alert = self._emit(ALERT_OUTLIER, record.subject_id, detail,
                               timestamp=record.collected_at)
        return pred, alert

    def report_incident(self, label: IncidentLabel) -> list[AlertEvent]:
        """Record an outcome, refit the learned model on every labeled
        registry record, rescore all subjects, and alert on each safe-to-
        vulnerable flip. Vulnerable-to-safe flips are logged, not alerted."""
        if label.subject_id not in self.registry:
            raise UnknownSubject(f"subject {label.subject_id!r} is not enrolled")
        self.label_store.append(label)

        if (self._last_retrain_at is not None
                and label.observed_at - self._last_retrain_at
                < self.config.min_retrain_interval):
            log.info("agent %s: retrain throttled at t=%d", self.agent_id,
                     label.observed_at)
            return []
        return self._retrain_and_diff(timestamp=label.observed_at)

    def _retrain_and_diff(self, timestamp: int) -> list[AlertEvent]:
        X = np.vstack([normalize(self.registry[lab.subject_id], self.schema)
                       for lab in self.label_store])
        y = np.array([lab.y for lab in self.label_store], dtype=np.int64)
        seed = retrain_seed(self.base_seed, self.models.learned.version + 1)
        self.models.learned = retrain(
            self.models.learned, X, y, epochs=self.config.retrain_epochs,
            lr=self.config.retrain_lr, seed=seed)
        self._last_retrain_at = timestamp

        new_cache = {sid: self._predict(rec)
                     for sid, rec in sorted(self.registry.items())}
        alerts = []
        for sid, pred in new_cache.items():
            old = self.prediction_cache.get(sid)
            if old is None or old.vulnerable == pred.vulnerable:
                continue
            if pred.vulnerable:
                detail = {"previous_score": old.score, "new_score": pred.score,
                          "previous_version": old.model_version}
                alerts.append(self._emit(ALERT_DANGER, sid, detail, timestamp))
            else:
                log.info("agent %s: subject %s left the danger zone "
                         "(%.3f -> %.3f)", self.agent_id, sid, old.score,
                         pred.score)
        self.prediction_cache = new_cache
        return alerts

    def safety_peers(self, subject_id: str, top_m: int
                     ) -> list[tuple[str, float]]:
        """Most-similar same-locality subjects, ties broken by subject id."""
        if subject_id not in self.registry:
            raise UnknownSubject(f"subject {subject_id!r} is not enrolled")
        me = self.registry[subject_id]
        scored = [(sid, similarity(me, rec, self.schema))
                  for sid, rec in self.registry.items()
                  if sid != subject_id and rec.locality_id == me.locality_id]
        scored.sort(key=lambda t: (-t[1], t[0]))
        return scored[:top_m]

    def prediction_for(self, subject_id: str) -> Prediction:
        if subject_id not in self.prediction_cache:
            raise UnknownSubject(f"subject {subject_id!r} is not enrolled")
        return self.prediction_cache[subject_id]

    def alerts_since(self, cursor: int) -> list[AlertEvent]:
        """Alerts with id strictly greater than the cursor, oldest first."""
        return [a for a in self.alert_log if a.alert_id > cursor]

    def dataset(self) -> Dataset:
        """The registry as a dataset (records sorted by subject id)."""
        return Dataset(schema=self.schema,
                       records=[r for _, r in sorted(self.registry.items())],
                       labels=list(self.label_store))

    # -- persistence ---------------------------------------------------------

    def snapshot(self) -> dict:
        state = {
            "agent_id": self.agent_id,
            "base_seed": self.base_seed,
            "config": self.config.to_json(),
            "schema": self.schema.to_json(),
            "models": self.models.to_json(),
            "registry": [r.to_json() for _, r in sorted(self.registry.items())],
            "labels": [lab.to_json() for lab in self.label_store],
            "predictions": [p.to_json() for _, p in
                            sorted(self.prediction_cache.items())],
            "alerts": [a.to_json() for a in self.alert_log],
            "next_alert_id": self._next_alert_id,
            "last_retrain_at": self._last_retrain_at,
        }
        return {"format": SNAPSHOT_FORMAT,
                "checksum": hashlib.sha256(
                    canonical_json(state).encode()).hexdigest(),
                "state": state}

    def snapshot_json(self) -> str:
        return canonical_json(self.snapshot())

    def digest(self) -> str:
        return self.snapshot()["checksum"]

    @classmethod
    def restore(cls, snapshot: dict) -> "AgentEngine":
        """Rebuild an engine from a snapshot; any integrity or structure
        failure raises CorruptSnapshot and never yields a partial engine."""
        if not isinstance(snapshot, dict):
            raise CorruptSnapshot("root", "not an object")
        for key in ("format", "checksum", "state"):
            if key not in snapshot:
                raise CorruptSnapshot(key, "missing")
        if snapshot["format"] != SNAPSHOT_FORMAT:
            raise CorruptSnapshot("format",
                                  f"unsupported {snapshot['format']!r}")
        state = snapshot["state"]
        if hashlib.sha256(canonical_json(state).encode()).hexdigest() \
                != snapshot["checksum"]:
            raise CorruptSnapshot("checksum", "integrity check failed")
        try:
            field_name = "schema"
            schema = FeatureSchema.from_json(state["schema"])
            field_name = "models"
            models = ModelBundle.from_json(state["models"])
            field_name = "config"
            config = EngineConfig.from_json(state["config"])
            field_name = "agent_id"
            engine = cls(agent_id=state["agent_id"], schema=schema,
                         models=models, base_seed=int(state["base_seed"]),
                         config=config)
            field_name = "registry"
            for obj in state["registry"]:
                rec = SurveyRecord.from_json(obj)
                engine.registry[rec.subject_id] = rec
            field_name = "labels"
            engine.label_store = [IncidentLabel.from_json(o)
                                  for o in state["labels"]]
            field_name = "predictions"
            for obj in state["predictions"]:
                pred = Prediction.from_json(obj)
                engine.prediction_cache[pred.subject_id] = pred
            field_name = "alerts"
            engine.alert_log = [AlertEvent.from_json(o)
                                for o in state["alerts"]]
            field_name = "next_alert_id"
            engine._next_alert_id = int(state["next_alert_id"])
            field_name = "last_retrain_at"
            lra = state["last_retrain_at"]
            engine._last_retrain_at = None if lra is None else int(lra)
        except CorruptSnapshot:
            raise
        except Exception as exc:
            raise CorruptSnapshot(field_name, str(exc)) from exc
        return engine

    @classmethod
    def restore_json(cls, text: str) -> "AgentEngine":
        try:
            snapshot = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CorruptSnapshot(f"byte {exc.pos}", "invalid JSON") from exc
        return cls.restore(snapshot)

    def alerts_jsonl(self) -> str:
        return "".join(canonical_json(a.to_json()) + "\n"
                       for a in self.alert_log)


def retrain_seed(base_seed: int, version: int) -> int:
    """Deterministic per-retrain seed derived from the agent's base seed."""
    ss = np.random.SeedSequence([base_seed & 0xFFFFFFFFFFFFFFFF, version])
    return int(ss.generate_state(1, dtype=np.uint64)[0])

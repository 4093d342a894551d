"""Deterministic discrete-event simulation of N agent devices and one central
server.

Enrollments and incidents route to per-agent engines (each evolving its own
model), SYNC events push an agent's new labeled data to the server, and
COHORT_ANALYSIS events run the structural analytics plus a central retrain on
the server's aggregate. All randomness flows from the config seed through
named substreams (one per agent, one for the scenario generator, one for the
server), so a config replays to a byte-identical report.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analytics import min_components_for, pca, similarity_stats
from .cohortgen import GenConfig, generate
from .engine import AgentEngine, EngineConfig, canonical_json, retrain_seed
from .errors import EmptyTrainingSet, ScenarioError, SentinelError
from .schema import (Dataset, FeatureSchema, IncidentLabel, SurveyRecord,
                     normalize, normalize_matrix)
from .scoring import (BlendPolicy, HeuristicModel, LearnedModel, ModelBundle,
                      retrain)

ENROLL = "ENROLL"
INCIDENT = "INCIDENT"
SYNC = "SYNC"
COHORT_ANALYSIS = "COHORT_ANALYSIS"

_KINDS = (ENROLL, INCIDENT, SYNC, COHORT_ANALYSIS)

# substream tags under the master seed
_STREAM_SCENARIO = 0
_STREAM_AGENT = 1
_STREAM_SERVER = 2


def _substream_seed(seed: int, *tags: int) -> int:
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, *tags])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class SimEvent:
    time: int
    seq: int
    kind: str
    agent_id: str | None = None
    record: SurveyRecord | None = None
    label: IncidentLabel | None = None

    def describe(self) -> str:
        return f"event #{self.seq} ({self.kind} at t={self.time})"

    def to_json(self) -> dict:
        obj: dict = {"time": self.time, "seq": self.seq, "kind": self.kind}
        if self.agent_id is not None:
            obj["agent_id"] = self.agent_id
        if self.record is not None:
            obj["record"] = self.record.to_json()
        if self.label is not None:
            obj["label"] = self.label.to_json()
        return obj


def parse_event(obj: dict, seq: int) -> SimEvent:
    if not isinstance(obj, dict):
        raise ScenarioError(f"event #{seq}: not an object")
    kind = obj.get("kind")
    if kind not in _KINDS:
        raise ScenarioError(f"event #{seq}: unknown kind {kind!r}")
    time = obj.get("time")
    if not isinstance(time, int) or time < 0:
        raise ScenarioError(f"event #{seq}: time must be a non-negative integer")
    agent_id = obj.get("agent_id")
    if kind != COHORT_ANALYSIS and not agent_id:
        raise ScenarioError(f"event #{seq}: {kind} needs an agent_id")
    record = label = None
    try:
        if kind == ENROLL:
            record = SurveyRecord.from_json(obj["record"])
        elif kind == INCIDENT:
            label = IncidentLabel.from_json(obj["label"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"event #{seq}: bad payload ({exc})") from exc
    return SimEvent(time=int(time), seq=seq, kind=kind, agent_id=agent_id,
                    record=record, label=label)


def load_script(text: str) -> list[SimEvent]:
    """Parse a JSONL scenario script; events are ordered by (time, line)."""
    events = []
    for idx, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"event #{idx}: invalid JSON ({exc})") from exc
        events.append(parse_event(obj, seq=idx))
    return sorted(events, key=lambda e: (e.time, e.seq))


@dataclass
class ScenarioParams:
    """Generated scenario: cohort records enrolled round-robin, then a seeded
    incident stream; part of the cohort is held out as the probe set."""

    gen: GenConfig
    probe_size: int = 20
    n_incidents: int = 12
    trafficked_prob: float = 0.5
    enroll_period: int = 1
    incident_gap: int = 2

    def to_json(self) -> dict:
        return {"gen": self.gen.to_json(), "probe_size": self.probe_size,
                "n_incidents": self.n_incidents,
                "trafficked_prob": self.trafficked_prob,
                "enroll_period": self.enroll_period,
                "incident_gap": self.incident_gap}

    @classmethod
    def from_json(cls, obj: dict) -> "ScenarioParams":
        return cls(gen=GenConfig.from_json(obj["gen"]),
                   probe_size=int(obj.get("probe_size", 20)),
                   n_incidents=int(obj.get("n_incidents", 12)),
                   trafficked_prob=float(obj.get("trafficked_prob", 0.5)),
                   enroll_period=int(obj.get("enroll_period", 1)),
                   incident_gap=int(obj.get("incident_gap", 2)))


@dataclass
class SimConfig:
    n_agents: int
    seed: int
    sync_period: int = 10
    schema: FeatureSchema | None = None
    theta: float = 0.5
    policy: BlendPolicy = field(default_factory=BlendPolicy)
    engine: EngineConfig = field(default_factory=EngineConfig)
    scenario_params: ScenarioParams | None = None
    scenario_events: list[SimEvent] | None = None
    probe: list[SurveyRecord] = field(default_factory=list)
    push_back: bool = False

    def validate(self) -> None:
        if self.n_agents < 1:
            raise ScenarioError("n_agents must be at least 1")
        if self.sync_period < 1:
            raise ScenarioError("sync_period must be at least 1")
        if self.scenario_params is None and self.scenario_events is None:
            raise ScenarioError("config needs scenario params or an event script")

    def to_json(self) -> dict:
        obj: dict = {"n_agents": self.n_agents, "seed": self.seed,
                     "sync_period": self.sync_period, "theta": self.theta,
                     "policy": self.policy.to_json(),
                     "engine": self.engine.to_json(),
                     "push_back": self.push_back}
        if self.schema is not None:
            obj["schema"] = self.schema.to_json()
        if self.scenario_params is not None:
            obj["scenario_params"] = self.scenario_params.to_json()
        if self.scenario_events is not None:
            obj["scenario_events"] = [e.to_json() for e in self.scenario_events]
        if self.probe:
            obj["probe"] = [r.to_json() for r in self.probe]
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "SimConfig":
        schema = (FeatureSchema.from_json(obj["schema"])
                  if "schema" in obj else None)
        params = (ScenarioParams.from_json(obj["scenario_params"])
                  if "scenario_params" in obj else None)
        events = None
        if "scenario_events" in obj:
            events = [parse_event(e, seq=i)
                      for i, e in enumerate(obj["scenario_events"])]
            events.sort(key=lambda e: (e.time, e.seq))
        return cls(n_agents=int(obj["n_agents"]), seed=int(obj["seed"]),
                   sync_period=int(obj.get("sync_period", 10)),
                   schema=schema, theta=float(obj.get("theta", 0.5)),
                   policy=BlendPolicy.from_json(obj["policy"])
                   if "policy" in obj else BlendPolicy(),
                   engine=EngineConfig.from_json(obj["engine"])
                   if "engine" in obj else EngineConfig(),
                   scenario_params=params, scenario_events=events,
                   probe=[SurveyRecord.from_json(r)
                          for r in obj.get("probe", [])],
                   push_back=bool(obj.get("push_back", False)))


def agent_name(i: int) -> str:
    return f"agent-{i:02d}"


def build_events(config: SimConfig) -> tuple[list[SimEvent],
                                             list[SurveyRecord]]:
    """Materialize the event stream. Generated scenarios: cohort records are
    enrolled round-robin, incidents hit already-enrolled subjects, every agent
    syncs each sync_period, and one cohort analysis closes the run."""
    if config.scenario_events is not None:
        return list(config.scenario_events), list(config.probe)

    params = config.scenario_params
    rng = np.random.default_rng(_substream_seed(config.seed, _STREAM_SCENARIO))
    # enrolled records must validate, so the invalid block stays out of play
    cohort = generate(dataclasses.replace(params.gen, invalid_block_size=0))
    records = cohort.records
    if len(records) <= params.probe_size:
        raise ScenarioError("cohort too small for the requested probe size")
    probe = records[:params.probe_size]
    to_enroll = records[params.probe_size:]

    events: list[SimEvent] = []
    seq = 0
    owner: dict[str, list[str]] = {agent_name(i): []
                                   for i in range(config.n_agents)}
    t = 1
    for i, rec in enumerate(to_enroll):
        agent = agent_name(i % config.n_agents)
        rec = SurveyRecord(rec.subject_id, rec.locality_id, rec.values,
                           collected_at=t)
        events.append(SimEvent(time=t, seq=seq, kind=ENROLL, agent_id=agent,
                               record=rec))
        owner[agent].append(rec.subject_id)
        seq += 1
        if (i + 1) % config.n_agents == 0:
            t += params.enroll_period

    incident_start = t + 1
    for k in range(params.n_incidents):
        agent = agent_name(int(rng.integers(config.n_agents)))
        if not owner[agent]:
            continue
        sid = owner[agent][int(rng.integers(len(owner[agent])))]
        outcome = ("trafficked" if rng.random() < params.trafficked_prob
                   else "confirmed-safe")
        when = incident_start + k * params.incident_gap
        events.append(SimEvent(time=when, seq=seq, kind=INCIDENT,
                               agent_id=agent,
                               label=IncidentLabel(sid, outcome, when)))
        seq += 1
    horizon = incident_start + params.n_incidents * params.incident_gap + 1

    for when in range(config.sync_period, horizon + config.sync_period,
                      config.sync_period):
        for i in range(config.n_agents):
            events.append(SimEvent(time=min(when, horizon), seq=seq, kind=SYNC,
                                   agent_id=agent_name(i)))
            seq += 1
    events.append(SimEvent(time=horizon + 1, seq=seq, kind=COHORT_ANALYSIS))
    events.sort(key=lambda e: (e.time, e.seq))
    return events, probe


class ServerStore:
    """Central aggregate: synced records plus labeled examples, and the global
    model retrained from them."""

    def __init__(self, schema: FeatureSchema, base_seed: int):
        self.schema = schema
        self.base_seed = base_seed
        self.records: dict[tuple[str, str], SurveyRecord] = {}
        self.examples: list[tuple[str, str, tuple[float, ...], int, int]] = []
        self.global_model = LearnedModel.zeros(len(schema))
        self.previous_top: list[str] = []

    @property
    def n_labels(self) -> int:
        return len(self.examples)

    def ingest(self, agent_id: str, registry: dict[str, SurveyRecord],
               labels: list[IncidentLabel]) -> int:
        for sid, rec in sorted(registry.items()):
            key = (agent_id, sid)
            held = self.records.get(key)
            if held is None or held.collected_at < rec.collected_at:
                self.records[key] = rec
        for lab in labels:
            rec = registry[lab.subject_id]
            self.examples.append((agent_id, lab.subject_id, rec.values,
                                  lab.y, lab.observed_at))
        return len(labels)

    def dataset(self) -> Dataset:
        recs = [self.records[k] for k in sorted(self.records)]
        return Dataset(schema=self.schema, records=recs, labels=[])


def central_retrain(store: ServerStore, epochs: int = 30, lr: float = 0.5
                    ) -> tuple[LearnedModel, dict]:
    """Retrain the global model on the server aggregate and summarize which
    features now carry the most weight (the increasingly-critical factors),
    with entries gained and lost against the previous global top-5."""
    if store.n_labels < 1:
        raise EmptyTrainingSet("server store holds no labels")
    X = np.vstack([
        normalize(SurveyRecord("x", "x", values=vals), store.schema)
        for _, _, vals, _, _ in store.examples])
    y = np.array([ex[3] for ex in store.examples], dtype=np.int64)
    seed = retrain_seed(store.base_seed, store.global_model.version + 1)
    model = retrain(store.global_model, X, y, epochs=epochs, lr=lr, seed=seed)
    coefs = np.abs(np.asarray(model.coefficients))
    order = np.argsort(-coefs, kind="stable")[:5]
    top = [store.schema.features[int(i)].id for i in order]
    summary = {"top_features": top,
               "gained": sorted(set(top) - set(store.previous_top)),
               "lost": sorted(set(store.previous_top) - set(top)),
               "model_version": model.version,
               "trained_on": model.trained_on}
    store.global_model = model
    store.previous_top = top
    return model, summary


def model_digest(model: LearnedModel) -> str:
    return hashlib.sha256(canonical_json(model.to_json()).encode()).hexdigest()


def divergence_matrix(agents: list[AgentEngine]) -> np.ndarray:
    """Pairwise Euclidean distance between learned coefficient vectors."""
    n = len(agents)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            a = np.asarray(agents[i].models.learned.coefficients)
            b = np.asarray(agents[j].models.learned.coefficients)
            out[i, j] = out[j, i] = float(np.linalg.norm(a - b))
    return out


def probe_disagreement(agents: list[AgentEngine],
                       probe: list[SurveyRecord]) -> float:
    """Fraction of (probe record, agent pair) combinations whose
    vulnerable/safe classifications differ."""
    if len(agents) < 2 or not probe:
        return 0.0
    calls = []
    for eng in agents:
        calls.append([eng._predict(rec).vulnerable for rec in probe])
    n = len(agents)
    total = disagree = 0
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(len(probe)):
                total += 1
                disagree += calls[i][k] != calls[j][k]
    return disagree / total


@dataclass
class SimReport:
    config_seed: int
    agents: list[dict]
    divergence: np.ndarray
    disagreement_rate: float
    cohort_analyses: list[dict]
    trace: list[dict]
    conservation: dict

    def to_json(self) -> dict:
        return {"config_seed": self.config_seed, "agents": self.agents,
                "divergence": [[float(v) for v in row]
                               for row in self.divergence],
                "disagreement_rate": self.disagreement_rate,
                "cohort_analyses": self.cohort_analyses,
                "conservation": self.conservation,
                "n_trace_events": len(self.trace)}

    def report_json(self) -> str:
        return canonical_json(self.to_json()) + "\n"

    def trace_jsonl(self) -> str:
        return "".join(canonical_json(t) + "\n" for t in self.trace)

    def divergence_csv(self) -> str:
        names = [a["agent_id"] for a in self.agents]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([""] + names)
        for name, row in zip(names, self.divergence):
            w.writerow([name] + [repr(float(v)) for v in row])
        return buf.getvalue()

    def save(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.report_json())
        (out / "trace.jsonl").write_text(self.trace_jsonl())
        (out / "divergence.csv").write_text(self.divergence_csv())


def run(config: SimConfig) -> SimReport:
    """Process the scenario in (time, seq) order and assemble the report.

    Fully deterministic for a fixed config: rerunning produces byte-identical
    report, trace, and divergence outputs.
    """
    config.validate()
    events, probe = build_events(config)
    schema = config.schema
    if schema is None:
        if config.scenario_params is not None:
            schema = config.scenario_params.gen.schema
        else:
            raise ScenarioError("scripted scenarios need an explicit schema")

    agents: dict[str, AgentEngine] = {}
    for i in range(config.n_agents):
        name = agent_name(i)
        bundle = ModelBundle(
            heuristic=HeuristicModel.uniform(len(schema), theta=config.theta),
            learned=LearnedModel.zeros(len(schema)),
            policy=config.policy)
        # one shared engine-seeding stream: retrain seeds then depend only on
        # (seed, model version), so agents fed identical event streams evolve
        # bit-identical models while differing data still diverges
        agents[name] = AgentEngine(
            name, schema, bundle,
            base_seed=_substream_seed(config.seed, _STREAM_AGENT),
            config=EngineConfig.from_json(config.engine.to_json()))

    server = ServerStore(schema, _substream_seed(config.seed, _STREAM_SERVER))
    synced_upto: dict[str, int] = {name: 0 for name in agents}
    labels_emitted = 0
    trace: list[dict] = []
    cohort_analyses: list[dict] = []

    def get_agent(ev: SimEvent) -> AgentEngine:
        if ev.agent_id not in agents:
            raise ScenarioError(f"{ev.describe()}: unknown agent "
                                f"{ev.agent_id!r}")
        return agents[ev.agent_id]

    for ev in events:
        entry: dict = {"time": ev.time, "seq": ev.seq, "kind": ev.kind}
        if ev.agent_id is not None:
            entry["agent_id"] = ev.agent_id
        if ev.kind == ENROLL:
            eng = get_agent(ev)
            try:
                pred, alert = eng.enroll(ev.record)
            except SentinelError as exc:
                raise ScenarioError(f"{ev.describe()}: {exc}") from exc
            entry.update(subject_id=ev.record.subject_id, score=pred.score,
                         vulnerable=pred.vulnerable,
                         outlier_alert=alert is not None)
        elif ev.kind == INCIDENT:
            eng = get_agent(ev)
            labels_emitted += 1
            try:
                alerts = eng.report_incident(ev.label)
            except SentinelError as exc:
                raise ScenarioError(f"{ev.describe()}: {exc}") from exc
            entry.update(subject_id=ev.label.subject_id,
                         outcome=ev.label.outcome,
                         model_version=eng.models.learned.version,
                         danger_alerts=[a.subject_id for a in alerts])
        elif ev.kind == SYNC:
            eng = get_agent(ev)
            new_labels = eng.label_store[synced_upto[ev.agent_id]:]
            synced_upto[ev.agent_id] = len(eng.label_store)
            pushed = server.ingest(ev.agent_id, eng.registry, new_labels)
            entry.update(labels_pushed=pushed,
                         server_labels=server.n_labels)
            if config.push_back and server.global_model.trained_on > 0:
                eng.models.learned = server.global_model
                entry.update(pushed_back_version=server.global_model.version)
        else:  # COHORT_ANALYSIS
            summary: dict = {"time": ev.time,
                             "n_records": len(server.records),
                             "n_labels": server.n_labels}
            ds = server.dataset()
            if len(ds.records) >= 3:
                X = normalize_matrix(ds.records, schema)
                fit = pca(X)
                if not fit.degenerate:
                    stats = similarity_stats(ds)
                    summary.update(
                        first_pc_evr=float(fit.explained_variance_ratio[0]),
                        components_for_85=min_components_for(0.85, fit),
                        duplicate_partner_fraction=
                            stats.duplicate_partner_fraction,
                        low_similarity_pair_fraction=
                            stats.low_similarity_pair_fraction(0.70))
            if server.n_labels >= 1:
                _, retrain_summary = central_retrain(
                    server, epochs=config.engine.retrain_epochs,
                    lr=config.engine.retrain_lr)
                summary["critical_factors"] = retrain_summary
            cohort_analyses.append(summary)
            entry.update(n_records=summary["n_records"],
                         n_labels=summary["n_labels"])
        trace.append(entry)

    ordered = [agents[agent_name(i)] for i in range(config.n_agents)]
    agent_rows = []
    for eng in ordered:
        kinds: dict[str, int] = {}
        for a in eng.alert_log:
            kinds[a.kind] = kinds.get(a.kind, 0) + 1
        agent_rows.append({"agent_id": eng.agent_id,
                           "model_digest": model_digest(eng.models.learned),
                           "model_version": eng.models.learned.version,
                           "n_subjects": len(eng.registry),
                           "n_labels": len(eng.label_store),
                           "alert_counts": dict(sorted(kinds.items()))})

    conservation = {
        "labels_emitted": labels_emitted,
        "labels_in_agents": sum(len(e.label_store) for e in ordered),
        "labels_in_server": server.n_labels,
    }
    return SimReport(config_seed=config.seed, agents=agent_rows,
                     divergence=divergence_matrix(ordered),
                     disagreement_rate=probe_disagreement(ordered, probe),
                     cohort_analyses=cohort_analyses, trace=trace,
                     conservation=conservation)

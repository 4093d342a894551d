"""Feature schema, survey records, datasets, and the encoding/validation rules
shared by every other module.

All features encode to the unit interval so that convex-combination scores are
directly interpretable as [0,1] vulnerability. Timestamps are logical integers
supplied by callers; nothing here reads a clock.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import RangeViolation, SchemaMismatch

BINARY = "binary"
ORDINAL = "ordinal"
NUMERIC = "numeric"

OUTCOME_TRAFFICKED = "trafficked"
OUTCOME_SAFE = "confirmed-safe"

_INT_TOL = 1e-9


@dataclass(frozen=True)
class FeatureDef:
    """One survey feature: binary, ordinal(arity), or bounded numeric [lo, hi]."""

    id: str
    kind: str
    arity: int = 0
    lo: float = 0.0
    hi: float = 1.0
    display_name: str = ""

    def __post_init__(self):
        if not self.id:
            raise ValueError("feature id must be a non-empty token")
        if self.kind == ORDINAL:
            if self.arity < 2:
                raise ValueError(f"feature {self.id!r}: ordinal arity must be >= 2")
        elif self.kind == NUMERIC:
            if not self.lo < self.hi:
                raise ValueError(f"feature {self.id!r}: numeric bounds need lo < hi")
        elif self.kind != BINARY:
            raise ValueError(f"feature {self.id!r}: unknown kind {self.kind!r}")

    def check(self, value: float) -> str | None:
        """Return a reason string if *value* is illegal for this feature, else None."""
        v = float(value)
        if not np.isfinite(v):
            return "not finite"
        if self.kind == BINARY:
            if v not in (0.0, 1.0):
                return "must be 0 or 1"
        elif self.kind == ORDINAL:
            if abs(v - round(v)) > _INT_TOL:
                return "must be an integer level"
            if not 0 <= round(v) <= self.arity - 1:
                return f"must be in 0..{self.arity - 1}"
        else:
            if not self.lo <= v <= self.hi:
                return f"must be in [{self.lo}, {self.hi}]"
        return None

    def encode(self, value: float) -> float:
        """Map a legal raw value to [0,1]."""
        v = float(value)
        if self.kind == BINARY:
            return v
        if self.kind == ORDINAL:
            return round(v) / (self.arity - 1)
        return (v - self.lo) / (self.hi - self.lo)

    def to_json(self) -> dict:
        params: dict = {}
        if self.kind == ORDINAL:
            params["arity"] = self.arity
        elif self.kind == NUMERIC:
            params["lo"] = self.lo
            params["hi"] = self.hi
        return {"id": self.id, "kind": self.kind, "params": params,
                "display_name": self.display_name}

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureDef":
        params = obj.get("params", {})
        return cls(id=obj["id"], kind=obj["kind"],
                   arity=int(params.get("arity", 0)),
                   lo=float(params.get("lo", 0.0)), hi=float(params.get("hi", 1.0)),
                   display_name=obj.get("display_name", ""))


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature definitions plus a monotone version number."""

    features: tuple[FeatureDef, ...]
    version: int = 1

    def __post_init__(self):
        if len(self.features) < 1:
            raise ValueError("schema needs at least one feature")
        ids = [f.id for f in self.features]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate feature ids: {dupes}")

    def __len__(self) -> int:
        return len(self.features)

    @property
    def feature_ids(self) -> list[str]:
        return [f.id for f in self.features]

    def index_of(self, feature_id: str) -> int:
        for i, f in enumerate(self.features):
            if f.id == feature_id:
                return i
        raise KeyError(feature_id)

    def to_json(self) -> dict:
        return {"version": self.version,
                "features": [f.to_json() for f in self.features]}

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureSchema":
        return cls(features=tuple(FeatureDef.from_json(f) for f in obj["features"]),
                   version=int(obj.get("version", 1)))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "FeatureSchema":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class SurveyRecord:
    """One subject's raw feature values plus identity and locality metadata."""

    subject_id: str
    locality_id: str
    values: tuple[float, ...]
    collected_at: int = 0

    def to_json(self) -> dict:
        return {"subject_id": self.subject_id, "locality_id": self.locality_id,
                "values": list(self.values), "collected_at": self.collected_at}

    @classmethod
    def from_json(cls, obj: dict) -> "SurveyRecord":
        return cls(subject_id=obj["subject_id"], locality_id=obj["locality_id"],
                   values=tuple(float(v) for v in obj["values"]),
                   collected_at=int(obj["collected_at"]))


@dataclass(frozen=True)
class IncidentLabel:
    """A reported outcome for a registered subject."""

    subject_id: str
    outcome: str
    observed_at: int = 0

    def __post_init__(self):
        if self.outcome not in (OUTCOME_TRAFFICKED, OUTCOME_SAFE):
            raise ValueError(f"outcome must be {OUTCOME_TRAFFICKED!r} or "
                             f"{OUTCOME_SAFE!r}, got {self.outcome!r}")

    @property
    def y(self) -> int:
        return 1 if self.outcome == OUTCOME_TRAFFICKED else 0

    def to_json(self) -> dict:
        return {"subject_id": self.subject_id, "outcome": self.outcome,
                "observed_at": self.observed_at}

    @classmethod
    def from_json(cls, obj: dict) -> "IncidentLabel":
        return cls(subject_id=obj["subject_id"], outcome=obj["outcome"],
                   observed_at=int(obj["observed_at"]))


@dataclass
class Dataset:
    """A schema with records and incident labels. May hold invalid records;
    validate_dataset reports them instead of refusing construction."""

    schema: FeatureSchema
    records: list[SurveyRecord] = field(default_factory=list)
    labels: list[IncidentLabel] = field(default_factory=list)


@dataclass(frozen=True)
class Violation:
    record_index: int
    subject_id: str
    feature_id: str
    value: float
    reason: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    unknown_label_subjects: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations and not self.unknown_label_subjects

    @property
    def flagged_record_indices(self) -> list[int]:
        return sorted({v.record_index for v in self.violations})

    def summary(self) -> str:
        if self.ok:
            return "dataset valid: no violations"
        lines = [f"{len(self.flagged_record_indices)} record(s) with violations:"]
        for v in self.violations:
            lines.append(f"  record {v.record_index} ({v.subject_id}): "
                         f"{v.feature_id}={v.value!r} {v.reason}")
        for sid in self.unknown_label_subjects:
            lines.append(f"  label references unknown subject {sid!r}")
        return "\n".join(lines)


def normalize(record: SurveyRecord, schema: FeatureSchema) -> np.ndarray:
    """Encode a record's raw values into a [0,1] vector aligned to schema order.

    Raises SchemaMismatch on length disagreement, RangeViolation (naming the
    feature) on the first illegal value.
    """
    if len(record.values) != len(schema):
        raise SchemaMismatch(
            f"record {record.subject_id!r} has {len(record.values)} values, "
            f"schema has {len(schema)} features")
    out = np.empty(len(schema), dtype=np.float64)
    for i, (fd, v) in enumerate(zip(schema.features, record.values)):
        reason = fd.check(v)
        if reason is not None:
            raise RangeViolation(fd.id, v, reason)
        out[i] = fd.encode(v)
    return out


def normalize_matrix(records: list[SurveyRecord], schema: FeatureSchema) -> np.ndarray:
    """Stack normalized records into an (n, d) matrix."""
    if not records:
        return np.empty((0, len(schema)), dtype=np.float64)
    return np.vstack([normalize(r, schema) for r in records])


def validate_dataset(d: Dataset) -> ValidationReport:
    """Report every schema violation; never raises. Valid datasets yield an
    empty report."""
    report = ValidationReport()
    for idx, rec in enumerate(d.records):
        if len(rec.values) != len(d.schema):
            report.violations.append(Violation(
                idx, rec.subject_id, "*", float("nan"),
                f"expected {len(d.schema)} values, got {len(rec.values)}"))
            continue
        for fd, v in zip(d.schema.features, rec.values):
            reason = fd.check(v)
            if reason is not None:
                report.violations.append(
                    Violation(idx, rec.subject_id, fd.id, float(v), reason))
    known = {r.subject_id for r in d.records}
    for lab in d.labels:
        if lab.subject_id not in known:
            report.unknown_label_subjects.append(lab.subject_id)
    return report


def valid_records(d: Dataset) -> list[SurveyRecord]:
    """Records that pass validation, in original order."""
    flagged = set(validate_dataset(d).flagged_record_indices)
    return [r for i, r in enumerate(d.records) if i not in flagged]


# -- default schema ----------------------------------------------------------
#
# The shipped 32-feature schema is a placeholder: the four verticals are real
# (education / protection / health / nutrition) but the individual feature
# definitions are illustrative, not a published instrument. Deployments load
# their own schema from file.

_DEFAULT_LAYOUT = [
    ("edu", [("enrolled_in_school", BINARY), ("school_within_distance", BINARY),
             ("has_study_support", BINARY), ("repeated_grade", BINARY),
             ("attendance_level", ORDINAL), ("literacy_level", ORDINAL),
             ("parent_education_level", ORDINAL),
             ("years_of_schooling", NUMERIC, 0.0, 12.0)]),
    ("pro", [("lives_with_guardian", BINARY), ("birth_registered", BINARY),
             ("reported_harassment", BINARY), ("knows_helpline", BINARY),
             ("supervision_level", ORDINAL), ("community_safety_level", ORDINAL),
             ("travel_unaccompanied_level", ORDINAL),
             ("age_years", NUMERIC, 10.0, 19.0)]),
    ("hea", [("immunized", BINARY), ("chronic_illness", BINARY),
             ("checkup_last_6m", BINARY), ("hygiene_access", BINARY),
             ("general_health_level", ORDINAL), ("care_access_level", ORDINAL),
             ("wellbeing_level", ORDINAL),
             ("bmi", NUMERIC, 12.0, 30.0)]),
    ("nut", [("midday_meal", BINARY), ("food_secure", BINARY),
             ("diet_diversity", BINARY), ("clean_water_access", BINARY),
             ("meal_frequency_level", ORDINAL), ("protein_intake_level", ORDINAL),
             ("anemia_risk_level", ORDINAL),
             ("meals_skipped_weekly", NUMERIC, 0.0, 21.0)]),
]


def default_schema() -> FeatureSchema:
    """The shipped 32-feature schema: 16 binary, 12 ordinal(4), 4 numeric."""
    feats = []
    for prefix, group in _DEFAULT_LAYOUT:
        for entry in group:
            name, kind = entry[0], entry[1]
            fid = f"{prefix}_{name}"
            disp = name.replace("_", " ")
            if kind == ORDINAL:
                feats.append(FeatureDef(fid, ORDINAL, arity=4, display_name=disp))
            elif kind == NUMERIC:
                feats.append(FeatureDef(fid, NUMERIC, lo=entry[2], hi=entry[3],
                                        display_name=disp))
            else:
                feats.append(FeatureDef(fid, BINARY, display_name=disp))
    return FeatureSchema(features=tuple(feats), version=1)


# -- CSV interchange ---------------------------------------------------------

_META_COLS = ["subject_id", "locality_id", "collected_at"]


def records_to_csv(records: list[SurveyRecord], schema: FeatureSchema) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_META_COLS + schema.feature_ids)
    for r in records:
        vals = [str(int(v)) if float(v).is_integer() else repr(v) for v in r.values]
        w.writerow([r.subject_id, r.locality_id, r.collected_at] + vals)
    return buf.getvalue()


def records_from_csv(text: str, schema: FeatureSchema) -> list[SurveyRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        return []
    header = rows[0]
    expected = _META_COLS + schema.feature_ids
    if header != expected:
        raise SchemaMismatch(
            f"survey CSV header does not match schema (expected "
            f"{len(expected)} columns starting {expected[:4]}, got {header[:4]})")
    out = []
    for row in rows[1:]:
        if not row:
            continue
        out.append(SurveyRecord(
            subject_id=row[0], locality_id=row[1], collected_at=int(row[2]),
            values=tuple(float(v) for v in row[3:])))
    return out


def labels_to_csv(labels: list[IncidentLabel]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["subject_id", "outcome", "observed_at"])
    for lab in labels:
        w.writerow([lab.subject_id, lab.outcome, lab.observed_at])
    return buf.getvalue()


def labels_from_csv(text: str) -> list[IncidentLabel]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        return []
    if rows[0] != ["subject_id", "outcome", "observed_at"]:
        raise SchemaMismatch(f"incidents CSV header unexpected: {rows[0]}")
    return [IncidentLabel(r[0], r[1], int(r[2])) for r in rows[1:] if r]

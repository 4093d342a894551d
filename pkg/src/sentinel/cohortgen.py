"""Seeded synthetic-cohort generator.

Real survey data in this problem space is private, so the generator is
calibrated until generated cohorts reproduce the published structural
statistics of such data: the duplicate-partner mass near 48%, under 5% of
pairs below 0.70 similarity, a first principal component near 21% explained
variance, and roughly 17 components to reach 85%.

Mechanism: each record samples an archetype and then flips features
independently; with probability duplicate_boost it is instead an exact copy of
an earlier record of the same archetype (that copy mechanism is what produces
the duplicate-partner mass). A block of records with out-of-range ordinal
values is appended last so validation can recover it exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .analytics import min_components_for, pca, similarity_stats
from .errors import BadConfig, InsufficientData
from .schema import (BINARY, NUMERIC, ORDINAL, Dataset, FeatureSchema,
                     SurveyRecord, default_schema, normalize_matrix,
                     validate_dataset)

_W_TOL = 1e-9


@dataclass(frozen=True)
class Archetype:
    """One latent profile: raw values per feature; numeric entries are the
    location the jitter is centered on."""

    profile: tuple[float, ...]


@dataclass
class GenConfig:
    n_records: int
    schema: FeatureSchema
    seed: int
    archetypes: tuple[Archetype, ...]
    archetype_weights: tuple[float, ...]
    flip_probs: tuple[float, ...]
    numeric_jitter: tuple[float, ...]  # raw-unit stddev, non-numeric entries 0
    duplicate_boost: float = 0.0
    invalid_block_size: int = 0
    locality_count: int = 6

    @property
    def archetype_count(self) -> int:
        return len(self.archetypes)

    def validate(self) -> None:
        d = len(self.schema)
        if self.n_records < 1:
            raise BadConfig("n_records must be positive")
        if not self.archetypes:
            raise BadConfig("need at least one archetype")
        w = np.asarray(self.archetype_weights, dtype=np.float64)
        if w.size != len(self.archetypes):
            raise BadConfig("one weight per archetype required")
        if np.any(w < 0) or abs(float(w.sum()) - 1.0) > _W_TOL:
            raise BadConfig("archetype weights must be a simplex vector")
        if len(self.flip_probs) != d or len(self.numeric_jitter) != d:
            raise BadConfig("flip_probs and numeric_jitter must align to schema")
        if any(not 0.0 <= f <= 1.0 for f in self.flip_probs):
            raise BadConfig("flip probabilities must lie in [0,1]")
        if not 0.0 <= self.duplicate_boost <= 1.0:
            raise BadConfig("duplicate_boost must lie in [0,1]")
        if self.invalid_block_size < 0:
            raise BadConfig("invalid_block_size must be non-negative")
        for a_idx, arch in enumerate(self.archetypes):
            if len(arch.profile) != d:
                raise BadConfig(f"archetype {a_idx} profile length mismatch")
            for fd, v in zip(self.schema.features, arch.profile):
                if fd.check(v) is not None:
                    raise BadConfig(
                        f"archetype {a_idx}: illegal base value {v!r} "
                        f"for feature {fd.id!r}")

    def to_json(self) -> dict:
        return {"n_records": self.n_records, "seed": self.seed,
                "schema": self.schema.to_json(),
                "archetypes": [list(a.profile) for a in self.archetypes],
                "archetype_weights": list(self.archetype_weights),
                "flip_probs": list(self.flip_probs),
                "numeric_jitter": list(self.numeric_jitter),
                "duplicate_boost": self.duplicate_boost,
                "invalid_block_size": self.invalid_block_size,
                "locality_count": self.locality_count}

    @classmethod
    def from_json(cls, obj: dict) -> "GenConfig":
        return cls(n_records=int(obj["n_records"]),
                   schema=FeatureSchema.from_json(obj["schema"]),
                   seed=int(obj["seed"]),
                   archetypes=tuple(Archetype(tuple(float(v) for v in p))
                                    for p in obj["archetypes"]),
                   archetype_weights=tuple(float(w)
                                           for w in obj["archetype_weights"]),
                   flip_probs=tuple(float(f) for f in obj["flip_probs"]),
                   numeric_jitter=tuple(float(j) for j in obj["numeric_jitter"]),
                   duplicate_boost=float(obj["duplicate_boost"]),
                   invalid_block_size=int(obj["invalid_block_size"]),
                   locality_count=int(obj.get("locality_count", 6)))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "GenConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def _draw_fresh(rng: np.random.Generator, schema: FeatureSchema,
                arch: Archetype, flip: tuple[float, ...],
                jitter: tuple[float, ...]) -> tuple[float, ...]:
    vals = []
    for j, fd in enumerate(schema.features):
        base = arch.profile[j]
        if fd.kind == BINARY:
            v = 1.0 - base if rng.random() < flip[j] else base
        elif fd.kind == ORDINAL:
            if rng.random() < flip[j]:
                other = int(rng.integers(fd.arity - 1))
                v = float(other if other < int(base) else other + 1)
            else:
                v = base
        else:
            if rng.random() < flip[j]:
                v = float(rng.uniform(fd.lo, fd.hi))
            else:
                v = float(np.clip(base + rng.normal(0.0, jitter[j]),
                                  fd.lo, fd.hi))
        vals.append(v)
    return tuple(vals)


def generate(config: GenConfig) -> Dataset:
    """Draw the cohort; deterministic per seed. Invalid records (out-of-range
    ordinal levels) are appended after the n_records valid ones."""
    config.validate()
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    schema = config.schema
    weights = np.asarray(config.archetype_weights, dtype=np.float64)
    weights = weights / weights.sum()
    records: list[SurveyRecord] = []
    by_archetype: list[list[int]] = [[] for _ in config.archetypes]

    for i in range(config.n_records):
        a = int(rng.choice(len(config.archetypes), p=weights))
        prev = by_archetype[a]
        if prev and rng.random() < config.duplicate_boost:
            src = records[prev[int(rng.integers(len(prev)))]]
            values, locality = src.values, src.locality_id
        else:
            values = _draw_fresh(rng, schema, config.archetypes[a],
                                 config.flip_probs, config.numeric_jitter)
            locality = f"loc-{int(rng.integers(config.locality_count)):02d}"
        records.append(SurveyRecord(subject_id=f"subj-{i:05d}",
                                    locality_id=locality, values=values,
                                    collected_at=i))
        by_archetype[a].append(i)

    ordinal_idx = [j for j, fd in enumerate(schema.features)
                   if fd.kind == ORDINAL]
    base = config.archetypes[0].profile
    for k in range(config.invalid_block_size):
        vals = list(base)
        j = ordinal_idx[k % len(ordinal_idx)]
        vals[j] = float(schema.features[j].arity + 1 + (k % 3))
        records.append(SurveyRecord(
            subject_id=f"subj-{config.n_records + k:05d}",
            locality_id=f"loc-{int(rng.integers(config.locality_count)):02d}",
            values=tuple(vals), collected_at=config.n_records + k))
    return Dataset(schema=schema, records=records, labels=[])


@dataclass
class CalibrationReport:
    """The four structural anchors, measured on the valid subset."""

    n_valid: int
    n_flagged: int
    duplicate_partner_fraction: float
    low_similarity_pair_fraction: float  # threshold 0.70
    first_pc_evr: float
    components_for_85: int
    degenerate_variance: bool = False

    def to_json(self) -> dict:
        return {"n_valid": self.n_valid, "n_flagged": self.n_flagged,
                "duplicate_partner_fraction": self.duplicate_partner_fraction,
                "low_similarity_pair_fraction_070":
                    self.low_similarity_pair_fraction,
                "first_pc_evr": self.first_pc_evr,
                "components_for_85": self.components_for_85,
                "degenerate_variance": self.degenerate_variance}


def measure(d: Dataset) -> CalibrationReport:
    """Measure the anchors, delegating to the analytics module. Records that
    fail validation are excluded first."""
    report = validate_dataset(d)
    flagged = set(report.flagged_record_indices)
    valid = [r for i, r in enumerate(d.records) if i not in flagged]
    if len(valid) < 3:
        raise InsufficientData("calibration needs at least 3 valid records")
    stats = similarity_stats(Dataset(schema=d.schema, records=valid))
    X = normalize_matrix(valid, d.schema)
    fit = pca(X)
    if fit.degenerate:
        return CalibrationReport(
            n_valid=len(valid), n_flagged=len(flagged),
            duplicate_partner_fraction=stats.duplicate_partner_fraction,
            low_similarity_pair_fraction=
                stats.low_similarity_pair_fraction(0.70),
            first_pc_evr=0.0, components_for_85=0, degenerate_variance=True)
    return CalibrationReport(
        n_valid=len(valid), n_flagged=len(flagged),
        duplicate_partner_fraction=stats.duplicate_partner_fraction,
        low_similarity_pair_fraction=stats.low_similarity_pair_fraction(0.70),
        first_pc_evr=float(fit.explained_variance_ratio[0]),
        components_for_85=min_components_for(0.85, fit),
        degenerate_variance=False)


# -- shipped calibration -------------------------------------------------------
#
# Frozen after a search over (ladder weights, outlier weight and footprint,
# flip probability, numeric jitter, duplicate_boost); see
# scripts/calibrate_cohort.py for the search harness.

DEFAULT_SEED = 20240917

_FLIP_P = 0.012
_OUTLIER_WEIGHT = 0.014
_LADDER_WEIGHT = 0.010
_N_LADDERS = 15
_DUPLICATE_BOOST = 0.315
_GRADIENT_STEPS = (-1.25, -0.75, -0.25, 0.25, 0.75, 1.25)
# per-numeric-feature location spread (raw units) and jitter around location
_NUM_SPREAD = {"edu_years_of_schooling": 2.4, "pro_age_years": 1.8,
               "hea_bmi": 3.2, "nut_meals_skipped_weekly": 3.6}
_NUM_JITTER_RATIO = 0.45
# categorical features the rare outlier profile deviates on
_OUTLIER_FOOTPRINT = 13


def default_calibrated_config(n_records: int = 1000,
                              seed: int = DEFAULT_SEED,
                              invalid_block_size: int = 7) -> GenConfig:
    """The committed generator calibration for the default 32-feature schema."""
    schema = default_schema()
    d = len(schema)
    numeric_idx = [j for j, fd in enumerate(schema.features)
                   if fd.kind == NUMERIC]
    cat_idx = [j for j, fd in enumerate(schema.features)
               if fd.kind != NUMERIC]

    base = []
    for fd in schema.features:
        if fd.kind == BINARY:
            base.append(1.0)
        elif fd.kind == ORDINAL:
            base.append(2.0)
        else:
            base.append((fd.lo + fd.hi) / 2.0)

    def flip_value(j: int) -> float:
        fd = schema.features[j]
        if fd.kind == BINARY:
            return 1.0 - base[j]
        return 0.0 if base[j] != 0.0 else float(fd.arity - 1)

    def with_numeric_gradient(profile: list[float], t: float) -> list[float]:
        out = list(profile)
        for j in numeric_idx:
            fd = schema.features[j]
            spread = _NUM_SPREAD[fd.id]
            out[j] = float(np.clip(base[j] + t * spread, fd.lo, fd.hi))
        return out

    archetypes: list[Archetype] = []
    weights: list[float] = []

    # dominant family: identical categorical profile, numeric locations graded
    # along one latent direction (drives the correlated-numerics component)
    dominant_total = 1.0 - _OUTLIER_WEIGHT - _N_LADDERS * _LADDER_WEIGHT
    for t in _GRADIENT_STEPS:
        archetypes.append(Archetype(tuple(with_numeric_gradient(base, t))))
        weights.append(dominant_total / len(_GRADIENT_STEPS))

    # ladder archetypes: two categorical deviations each, nearly disjoint
    # feature pairs, numeric locations reusing the same gradient
    for k in range(_N_LADDERS):
        prof = list(base)
        ja = cat_idx[(2 * k) % len(cat_idx)]
        jb = cat_idx[(2 * k + 1) % len(cat_idx)]
        prof[ja] = flip_value(ja)
        prof[jb] = flip_value(jb)
        t = _GRADIENT_STEPS[k % len(_GRADIENT_STEPS)]
        archetypes.append(Archetype(tuple(with_numeric_gradient(prof, t))))
        weights.append(_LADDER_WEIGHT)

    # rare outlier profile: a distinct block deviating on many features at
    # once plus extreme numeric locations (the published data's odd cluster)
    prof = list(base)
    for j in cat_idx[:_OUTLIER_FOOTPRINT]:
        prof[j] = flip_value(j)
    for j in numeric_idx:
        fd = schema.features[j]
        prof[j] = fd.lo + 0.06 * (fd.hi - fd.lo)
    archetypes.append(Archetype(tuple(prof)))
    weights.append(_OUTLIER_WEIGHT)

    jitter = [0.0] * d
    for j in numeric_idx:
        jitter[j] = _NUM_JITTER_RATIO * _NUM_SPREAD[schema.features[j].id]

    return GenConfig(
        n_records=n_records, schema=schema, seed=seed,
        archetypes=tuple(archetypes), archetype_weights=tuple(weights),
        flip_probs=tuple([_FLIP_P] * d), numeric_jitter=tuple(jitter),
        duplicate_boost=_DUPLICATE_BOOST,
        invalid_block_size=invalid_block_size)

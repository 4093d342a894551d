"""Cold-start convex scorer, online-trained linear classifier, and the blend
schedule that hands authority from heuristic to learned model as labels arrive.

The learned model is a single linear discriminant with a sigmoid link: cheap
enough to refit on-device after every incident, and its coefficients stay
directly comparable across agents (the sync simulator's divergence metric
depends on that). Retraining is a full refit from zero initialization on the
complete labeled set, so a model is a pure function of (data, epochs, lr, seed)
and two parties training on identical data get identical models.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatch, EmptyTrainingSet

_W_TOL = 1e-9


def sigmoid(z: float) -> float:
    # stable in both tails
    if z >= 0:
        ez = math.exp(-z)
        return 1.0 / (1.0 + ez)
    ez = math.exp(z)
    return ez / (1.0 + ez)


@dataclass(frozen=True)
class HeuristicModel:
    """Convex weight vector with a danger-zone threshold.

    Weights are non-negative and sum to 1, so scores of [0,1] feature vectors
    stay in [0,1] and theta reads directly as the vulnerability boundary.
    """

    weights: tuple[float, ...]
    theta: float = 0.5

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.size < 1:
            raise ValueError("heuristic model needs at least one weight")
        if np.any(w < 0):
            raise ValueError("heuristic weights must be non-negative")
        if abs(float(w.sum()) - 1.0) > _W_TOL:
            raise ValueError(f"heuristic weights must sum to 1, got {w.sum()!r}")
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must lie strictly inside (0,1), got {self.theta}")

    @classmethod
    def uniform(cls, dim: int, theta: float = 0.5) -> "HeuristicModel":
        return cls(weights=tuple([1.0 / dim] * dim), theta=theta)

    def to_json(self) -> dict:
        return {"weights": list(self.weights), "theta": self.theta}

    @classmethod
    def from_json(cls, obj: dict) -> "HeuristicModel":
        return cls(weights=tuple(float(w) for w in obj["weights"]),
                   theta=float(obj["theta"]))


@dataclass(frozen=True)
class LearnedModel:
    """Linear discriminant with sigmoid link; version bumps at each retrain."""

    coefficients: tuple[float, ...]
    intercept: float = 0.0
    version: int = 0
    trained_on: int = 0
    degenerate_single_class: bool = False

    @classmethod
    def zeros(cls, dim: int) -> "LearnedModel":
        return cls(coefficients=tuple([0.0] * dim))

    @property
    def dim(self) -> int:
        return len(self.coefficients)

    def probability(self, x: np.ndarray) -> float:
        c = np.asarray(self.coefficients, dtype=np.float64)
        if x.shape != c.shape:
            raise DimensionMismatch(
                f"input has {x.shape[0]} components, model has {c.shape[0]}")
        return sigmoid(float(c @ x) + self.intercept)

    def to_json(self) -> dict:
        return {"coefficients": list(self.coefficients), "intercept": self.intercept,
                "version": self.version, "trained_on": self.trained_on,
                "degenerate_single_class": self.degenerate_single_class}

    @classmethod
    def from_json(cls, obj: dict) -> "LearnedModel":
        return cls(coefficients=tuple(float(c) for c in obj["coefficients"]),
                   intercept=float(obj["intercept"]), version=int(obj["version"]),
                   trained_on=int(obj["trained_on"]),
                   degenerate_single_class=bool(
                       obj.get("degenerate_single_class", False)))


@dataclass(frozen=True)
class BlendPolicy:
    """Label-count ramp for the heuristic-to-learned handoff.

    alpha stays 0 until floor_labels incidents exist, then climbs linearly and
    saturates at 1 once n0 labels have accumulated.
    """

    floor_labels: int = 5
    n0: int = 50

    def __post_init__(self):
        if self.floor_labels < 0 or self.n0 <= 0:
            raise ValueError("floor_labels must be >= 0 and n0 > 0")
        if not self.floor_labels < self.n0:
            raise ValueError("floor_labels must be strictly below n0")

    def alpha(self, trained_on: int) -> float:
        raw = (trained_on - self.floor_labels) / (self.n0 - self.floor_labels)
        return min(1.0, max(0.0, raw))

    def to_json(self) -> dict:
        return {"floor_labels": self.floor_labels, "n0": self.n0}

    @classmethod
    def from_json(cls, obj: dict) -> "BlendPolicy":
        return cls(floor_labels=int(obj["floor_labels"]), n0=int(obj["n0"]))


@dataclass(frozen=True)
class Prediction:
    subject_id: str
    score: float
    vulnerable: bool
    alpha: float
    model_version: int

    def to_json(self) -> dict:
        return {"subject_id": self.subject_id, "score": self.score,
                "vulnerable": self.vulnerable, "alpha": self.alpha,
                "model_version": self.model_version}

    @classmethod
    def from_json(cls, obj: dict) -> "Prediction":
        return cls(subject_id=obj["subject_id"], score=float(obj["score"]),
                   vulnerable=bool(obj["vulnerable"]), alpha=float(obj["alpha"]),
                   model_version=int(obj["model_version"]))


def score_heuristic(x: np.ndarray, m: HeuristicModel) -> float:
    """Convex combination of normalized features; lands in [0,1]."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(m.weights, dtype=np.float64)
    if x.shape != w.shape:
        raise DimensionMismatch(
            f"input has {x.shape[0]} components, model has {w.shape[0]}")
    return float(w @ x)


def sgd_update(m: LearnedModel, x: np.ndarray, y: int, lr: float,
               sample_weight: float = 1.0) -> LearnedModel:
    """One stochastic gradient step on the log-loss.

    c' = c - lr*w*(sigma(c.x + b) - y)*x, b' = b - lr*w*(sigma - y).
    Version is untouched; versioning happens when a retrain completes.
    """
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    x = np.asarray(x, dtype=np.float64)
    c = np.asarray(m.coefficients, dtype=np.float64)
    if x.shape != c.shape:
        raise DimensionMismatch(
            f"input has {x.shape[0]} components, model has {c.shape[0]}")
    g = (sigmoid(float(c @ x) + m.intercept) - y) * sample_weight
    return replace(m,
                   coefficients=tuple(c - lr * g * x),
                   intercept=m.intercept - lr * g)


def retrain(m: LearnedModel, X: np.ndarray, y: np.ndarray, epochs: int,
            lr: float, seed: int, class_weighting: bool = True) -> LearnedModel:
    """Full refit: `epochs` seeded-shuffle passes of sgd_update from zeros.

    Per-class inverse-frequency weights offset the heavy skew toward the
    non-victim class; with only one class present the refit still runs but the
    result is flagged degenerate_single_class. Deterministic for fixed
    (X, y, epochs, lr, seed).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyTrainingSet("retrain needs at least one labeled example")
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"{X.shape[0]} examples but {y.shape[0]} labels")
    if X.shape[1] != m.dim:
        raise DimensionMismatch(
            f"examples have {X.shape[1]} features, model has {m.dim}")
    if epochs < 1:
        raise ValueError("epochs must be a positive integer")

    n = X.shape[0]
    n_pos = int(y.sum())
    single_class = n_pos == 0 or n_pos == n
    weights = np.ones(n, dtype=np.float64)
    if class_weighting and not single_class:
        weights[y == 1] = n / (2.0 * n_pos)
        weights[y == 0] = n / (2.0 * (n - n_pos))

    model = LearnedModel.zeros(m.dim)
    rng = np.random.default_rng(seed)
    for _ in range(epochs):
        for i in rng.permutation(n):
            model = sgd_update(model, X[i], int(y[i]), lr,
                               sample_weight=float(weights[i]))
    return replace(model, version=m.version + 1, trained_on=n,
                   degenerate_single_class=single_class)


def score_blended(x: np.ndarray, h: HeuristicModel, l: LearnedModel,
                  policy: BlendPolicy, subject_id: str = "") -> Prediction:
    """Blend heuristic and learned scores by the label-count schedule.

    At alpha 0 the result is bit-identical to the heuristic score; at alpha 1,
    to the learned probability. The danger-zone boundary is the heuristic
    model's theta throughout.
    """
    x = np.asarray(x, dtype=np.float64)
    if len(h.weights) != l.dim:
        raise DimensionMismatch(
            f"heuristic has {len(h.weights)} weights, learned model has {l.dim}")
    alpha = policy.alpha(l.trained_on)
    if alpha == 0.0:
        score = score_heuristic(x, h)
    elif alpha == 1.0:
        score = l.probability(x)
    else:
        score = (1.0 - alpha) * score_heuristic(x, h) + alpha * l.probability(x)
    return Prediction(subject_id=subject_id, score=score,
                      vulnerable=score >= h.theta, alpha=alpha,
                      model_version=l.version)


@dataclass
class ModelBundle:
    """Everything an agent needs to score: heuristic, learned, policy."""

    heuristic: HeuristicModel
    learned: LearnedModel
    policy: BlendPolicy = field(default_factory=BlendPolicy)

    def to_json(self) -> dict:
        return {"heuristic": self.heuristic.to_json(),
                "learned": self.learned.to_json(),
                "policy": self.policy.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "ModelBundle":
        return cls(heuristic=HeuristicModel.from_json(obj["heuristic"]),
                   learned=LearnedModel.from_json(obj["learned"]),
                   policy=BlendPolicy.from_json(obj["policy"]))

    @classmethod
    def fresh(cls, dim: int, theta: float = 0.5,
              policy: BlendPolicy | None = None) -> "ModelBundle":
        return cls(heuristic=HeuristicModel.uniform(dim, theta),
                   learned=LearnedModel.zeros(dim),
                   policy=policy or BlendPolicy())

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ModelBundle":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

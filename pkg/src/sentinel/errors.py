"""Shared exception types. Every error carries enough context to name the offender."""


class SentinelError(Exception):
    """Base class for all package errors."""


class SchemaMismatch(SentinelError):
    """Record/vector length or feature identity does not match the schema."""


class RangeViolation(SentinelError):
    """A raw value falls outside its feature's legal range."""

    def __init__(self, feature_id: str, value, reason: str = "out of range"):
        self.feature_id = feature_id
        self.value = value
        super().__init__(f"feature {feature_id!r}: value {value!r} {reason}")


class DimensionMismatch(SentinelError):
    """Vector and model dimensions disagree."""


class EmptyTrainingSet(SentinelError):
    """Retrain was asked to run on zero examples."""


class InsufficientData(SentinelError):
    """Too few records for the requested analysis."""


class BadK(SentinelError):
    """Requested cluster count outside 1..n."""


class UnknownSubject(SentinelError):
    """Subject id not present in the agent registry."""


class CorruptSnapshot(SentinelError):
    """Snapshot failed integrity or structure checks; names the first bad field."""

    def __init__(self, location: str, reason: str = "malformed"):
        self.location = location
        super().__init__(f"corrupt snapshot at {location}: {reason}")


class StorageFailure(SentinelError):
    """Persisting a snapshot failed; the mutation was rolled back."""


class BadConfig(SentinelError):
    """Generator or simulator configuration violates its invariants."""


class ScenarioError(SentinelError):
    """Malformed simulation scenario; names the offending event."""

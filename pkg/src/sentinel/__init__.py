"""Adaptive decision support for community-outreach field agents: cold-start
convex scoring, continuously retrained per-agent models, danger-zone alerts,
survey structural analytics, and a deterministic multi-agent sync simulator."""

__version__ = "0.1.0"

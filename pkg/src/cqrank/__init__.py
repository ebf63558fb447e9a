"""Clarification-question ranking over frozen sentence embeddings."""

__version__ = "0.1.0"

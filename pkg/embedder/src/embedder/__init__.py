"""Sentence embedding extraction and serving for the ranking pipeline."""

__version__ = "0.1.0"

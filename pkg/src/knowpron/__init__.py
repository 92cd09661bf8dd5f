"""Pronoun coreference resolution with contextual scoring and knowledge
attention over external-knowledge features."""

__version__ = "0.1.0"

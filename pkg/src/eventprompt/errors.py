"""Exception types shared across the package."""

from __future__ import annotations


class EventPromptError(Exception):
    """Base class for validation and pipeline errors."""


class SchemaError(EventPromptError):
    """Schema file malformed or ontology invariants violated."""


class CorpusError(EventPromptError):
    """Corpus file malformed, spans out of bounds, or annotation mismatch."""


class PromptError(EventPromptError):
    """Prompt construction violated a precondition."""


class InstanceRejected(PromptError):
    """Instance cannot be built faithfully (overlapping spans, sentinel budget).

    Pipelines catch this to skip the instance with a diagnostic instead of
    aborting the run.
    """


class GenerationError(EventPromptError):
    """Backend or decoding failure."""


class ConfigError(EventPromptError):
    """Pipeline configuration invalid."""

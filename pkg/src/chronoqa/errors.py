"""Shared exception types."""
from __future__ import annotations


class ChronoqaError(Exception):
    """Base class for package errors."""


class LoadError(ChronoqaError):
    """A CSV row or manifest-declared relation failed validation."""


class ManifestError(ChronoqaError):
    """The run manifest is missing, malformed, or references absent files."""


class QueryError(ChronoqaError):
    """A query referenced unknown attributes or mistyped a predicate."""


class SamplerError(ChronoqaError):
    """No reference interval satisfying the request exists within bounds."""


class InferenceError(ChronoqaError):
    """Dependency chaining failed or the chained dependency does not hold."""


class GatewayError(ChronoqaError):
    """Transport, authentication, or response-shape failure at the model endpoint."""


class ScoreError(ChronoqaError):
    """Scoring inputs are inconsistent (id mismatches, empty files, bad verdicts)."""

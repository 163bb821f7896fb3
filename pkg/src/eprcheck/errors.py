"""Exception types shared across the package."""

from __future__ import annotations


class ShapeError(ValueError):
    """An array has the wrong dimensions for the requested operation."""


class ValidationError(ValueError):
    """An input violates a structural invariant (normalization, orthogonality, ...)."""


class MissingIndexError(ValidationError):
    """A measurement index required by the requested check is absent."""


class ConformanceError(RuntimeError):
    """A source failed the conformance check required by a downstream operation.

    Carries the failing report, and optionally a lemma report produced in
    diagnostic mode to localize which identity breaks.
    """

    def __init__(self, message: str, report=None, lemmas=None):
        super().__init__(message)
        self.report = report
        self.lemmas = lemmas


class StructuralError(RuntimeError):
    """A decomposition step produced vectors violating block invariants.

    Should not occur for sources that genuinely pass the conformance check;
    carries diagnostics for the offending quantity.
    """

    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics

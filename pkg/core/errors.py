#!/usr/bin/env python3
"""
Exception hierarchy for TallyFit.

Library code raises these; the CLI boundary (main.py) maps them to exit codes.
"""

from typing import Optional


class TallyFitError(Exception):
    """Base class for all TallyFit errors."""

    exit_code = 2


class DomainError(TallyFitError, ValueError):
    """Argument outside the domain of an operation (bad index, probability, shape)."""


class ValidationError(TallyFitError):
    """Input file or configuration failed validation."""

    def __init__(self, message: str, source: Optional[str] = None, row: Optional[int] = None):
        self.source = source
        self.row = row
        location = ""
        if source:
            location = f"{source}"
            if row is not None:
                location += f", row {row}"
            location = f" [{location}]"
        super().__init__(f"{message}{location}")


class ConfigError(ValidationError):
    """Invalid configuration value or unknown configuration key."""


class EvaluationError(TallyFitError):
    """The likelihood or its gradient is undefined for a precinct."""

    def __init__(self, message: str, precinct_id=None):
        self.precinct_id = precinct_id
        if precinct_id is not None:
            message = f"{message} (precinct {precinct_id})"
        super().__init__(message)


class CapabilityError(TallyFitError):
    """Input is too large for an enumeration-based routine."""


class DivergenceError(TallyFitError):
    """Optimization diverged and produced no usable model."""

    exit_code = 3

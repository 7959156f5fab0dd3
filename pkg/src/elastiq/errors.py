"""Exception types shared across the package."""

from __future__ import annotations


class ElastiqError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ElastiqError, ValueError):
    """Inconsistent shapes, sizes, or configuration values."""


class NumericError(ElastiqError, ArithmeticError):
    """Non-finite values encountered during computation."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class EmptyLossError(ElastiqError, ValueError):
    """Every sample weight in a loss evaluation was zero."""


class DataError(ElastiqError, ValueError):
    """Malformed or invalid input data (CSV rows, checkpoint fields)."""

    def __init__(self, message: str, row: int | None = None, field: str | None = None):
        super().__init__(message)
        self.row = row
        self.field = field


class InfeasibleError(ElastiqError, ValueError):
    """A consumer decision problem has no feasible plan."""


class StageError(ElastiqError, RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage

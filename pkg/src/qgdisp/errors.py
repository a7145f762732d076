"""Exception hierarchy shared by the numerical modules and the CLI."""

from __future__ import annotations


class QGError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(QGError, ValueError):
    """Invalid parameters or configuration values."""


class DataError(QGError, ValueError):
    """Input samples that cannot be processed (NaN, Inf, wrong shape)."""


class BlockRangeError(QGError, IndexError):
    """Dyadic block index outside the range resolvable on the grid."""


class FitError(QGError, ValueError):
    """Too few or too narrowly spread samples for a decay fit."""


class AccuracyError(QGError, RuntimeError):
    """A quadrature did not reach the requested tolerance within its budget."""

    def __init__(self, message: str, best_estimate: complex, error_bound: float):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.error_bound = error_bound


class BlowUpError(QGError, RuntimeError):
    """Non-finite values appeared during time integration."""

    def __init__(self, message: str, last_valid_time: float):
        super().__init__(message)
        self.last_valid_time = last_valid_time


class AuditFailure(QGError, RuntimeError):
    """A numerical audit found a violated inequality."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time

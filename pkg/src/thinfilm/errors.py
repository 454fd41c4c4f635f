"""Exception hierarchy shared across the package."""
from __future__ import annotations


class ThinFilmError(Exception):
    """Base class for all package errors."""


class DomainError(ThinFilmError, ValueError):
    """A function was evaluated outside the set where it is defined."""


class NotCritical(ThinFilmError, ValueError):
    pass


class ZeroDestabilization(ThinFilmError, ValueError):
    pass


class NonpositiveField(DomainError):
    pass


class ExponentOutOfRange(ThinFilmError, ValueError):
    pass


class UnorderedSamples(ThinFilmError, ValueError):
    pass


class EmptyData(ThinFilmError, ValueError):
    pass


class LinearSolveFailure(ThinFilmError, RuntimeError):
    pass


class StepCollapse(ThinFilmError, RuntimeError):
    pass


class RegionError(ThinFilmError, ValueError):
    """Exponents or data fall outside the region a routine is valid for."""


class NotNegativeEnergy(ThinFilmError, ValueError):
    pass


class DomainTooSmall(ThinFilmError, RuntimeError):
    pass


class NoBlowupWithinHorizon(ThinFilmError, RuntimeError):
    def __init__(self, message: str, ledger=None):
        super().__init__(message)
        self.ledger = ledger


class BoundaryContact(ThinFilmError, ValueError):
    pass


class InsufficientSpread(ThinFilmError, ValueError):
    pass


class HypothesisFailed(ThinFilmError, ValueError):
    def __init__(self, message: str, H: float | None = None):
        super().__init__(message)
        self.H = H


class BadShape(ThinFilmError, ValueError):
    pass


class FitFailure(ThinFilmError, RuntimeError):
    pass


class ConfigError(ThinFilmError, ValueError):
    pass

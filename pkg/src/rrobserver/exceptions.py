"""Exception hierarchy for the observer toolkit."""


class RRObserverError(Exception):
    """Base class for all package errors."""


class DimensionError(RRObserverError, ValueError):
    """Matrix or vector shapes are inconsistent."""


class DomainError(RRObserverError, ValueError):
    """An argument lies outside its admissible range."""


class BoundViolationError(RRObserverError):
    """More successive dropouts than the declared bound allows."""


class InvalidProblemError(RRObserverError, ValueError):
    pass


class IllConditionedCertificateError(RRObserverError):
    """``X Gamma`` is numerically singular, so gains cannot be recovered."""


class MissingGainError(RRObserverError, KeyError):
    pass


class ConfigError(RRObserverError, ValueError):
    """Experiment configuration is malformed; the message names the field path."""

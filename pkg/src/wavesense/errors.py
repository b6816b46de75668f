"""Exception types shared across the package."""


class WavesenseError(Exception):
    """Base class for package errors."""


class FormatError(WavesenseError):
    """A container or hyperparameter file is malformed or inconsistent."""


class ConfigError(WavesenseError):
    """Invalid configuration: bad keys, violated invariants, bad solver settings."""


class NumericalError(WavesenseError):
    """Numerical failure: non-finite criterion, singular system, zero spectral bound."""

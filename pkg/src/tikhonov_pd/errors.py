"""Exception hierarchy shared by the library and the CLI."""


class TikhonovPDError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(TikhonovPDError, ValueError):
    """An argument has the wrong shape, sign or value."""


class DomainError(TikhonovPDError, ValueError):
    """A function was evaluated outside its domain (e.g. t <= 0)."""


class NoSolutionError(TikhonovPDError):
    """A linear KKT system has no solution within tolerance."""


class NumericalError(TikhonovPDError):
    """A linear solve failed where it should not."""


class PreconditionError(TikhonovPDError):
    """A certificate was requested outside the hypotheses it relies on."""


class InsufficientDataError(TikhonovPDError):
    """Too few samples to fit a rate."""


class ConfigError(TikhonovPDError):
    """Invalid experiment configuration; the message names the offending key."""


class IntegrationError(TikhonovPDError):
    """Base class for integrator failures; carries the partial trajectory."""

    def __init__(self, message, partial=None, last_time=None):
        super().__init__(message)
        self.partial = partial
        self.last_time = last_time


class StepLimitError(IntegrationError):
    """The integrator exhausted ``max_steps``."""


class DivergenceError(IntegrationError):
    """A non-finite value appeared in the state."""

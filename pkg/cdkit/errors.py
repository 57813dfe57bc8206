"""
Exception hierarchy for the counterdiabatic driving toolkit
"""


class CDKitError(Exception):
    """Base class for all toolkit errors."""


class DomainError(CDKitError, ValueError):
    """Argument outside the domain of an operation."""


class GaplessError(CDKitError):
    """Spectrum gap vanishes where the gauge potential needs it."""


class TrackingError(CDKitError):
    """Eigenstate continuity could not be established on a parameter window."""

    def __init__(self, message: str, window: tuple = None):
        super().__init__(message)
        self.window = window


class ConvergenceError(CDKitError):
    """Iterative reference did not converge within its step cap."""

    def __init__(self, message: str, last_delta: float = None, steps: int = None):
        super().__init__(message)
        self.last_delta = last_delta
        self.steps = steps


class CapabilityError(CDKitError):
    """Input lacks a capability the operation requires (e.g. schedule derivatives)."""


class ConfigError(CDKitError):
    """Invalid experiment configuration or CLI usage."""


class PreconditionWarning(UserWarning):
    """A lemma or theorem assumption does not hold; results carry no guarantee."""

"""Exception hierarchy shared across the package."""


class NegsteerError(Exception):
    """Base class for all package errors."""


class DomainError(NegsteerError):
    """An argument is outside the mathematical domain of an operation."""


class NumericalError(NegsteerError):
    """A numerical routine failed (eigendecomposition, total underflow, ...)."""


class DegenerateWeights(NegsteerError):
    """Importance weights collapsed; the Monte-Carlo estimate is unusable."""


class DegenerateAnchor(NegsteerError):
    """An anchor direction has (near-)zero norm and cannot be normalized."""


class InsufficientData(NegsteerError):
    """Not enough points for the requested statistic."""


class ShapeMismatch(NegsteerError):
    """Array shapes are inconsistent."""


class UnknownCategory(NegsteerError):
    """A category or label name does not resolve in the world taxonomy."""


class MissingReplaySource(NegsteerError):
    """A replay controller mode references a run artifact that does not exist."""


class ConfigError(NegsteerError):
    """Run configuration is invalid or references missing files."""


class IncompatibleRuns(NegsteerError):
    """Runs being compared do not share a world/category."""


class SamplingError(NegsteerError):
    """A collaborator failed during sampling; carries step context."""

    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step

"""Exception hierarchy shared by the simulator, statistics and CLI."""


class StochNSError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class LatticeMismatchError(StochNSError, ValueError):
    """Two fields live on different lattices."""


class DomainError(StochNSError, ValueError):
    """An argument lies outside the domain of an operation."""


class ConfigError(StochNSError, ValueError):
    """Invalid configuration. ``problems`` lists every violation found."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class StabilityError(StochNSError):
    """Time step violates the advective stability bound; the step is rejected."""

    exit_code = 2


class BlowUpError(StochNSError):
    """Non-finite coefficients appeared during integration."""

    exit_code = 2

    def __init__(self, message, t=None, max_abs=None, checkpoint=None):
        super().__init__(message)
        self.t = t
        self.max_abs = max_abs
        self.checkpoint = checkpoint


class InsufficientDataError(StochNSError):
    exit_code = 3


class FitError(StochNSError):
    """Scaling fit could not be performed (too few usable separations)."""

    exit_code = 3

"""Exception hierarchy shared across the simulator."""


class VanetSimError(Exception):
    """Base class for all simulator errors."""


class ParseError(VanetSimError):
    """Scenario input could not be parsed into a valid trace."""


class ValidationFailed(VanetSimError):
    """Scenario parsed but failed validation; `errors` lists the reasons."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


class ConfigError(VanetSimError):
    """Invalid algorithm id, parameter, or frame/config mismatch."""


class UsageError(VanetSimError):
    """API misuse: out-of-order accumulation, illegal status transition, etc."""


class NotFoundError(VanetSimError):
    """Unknown scenario or run id."""


class RunCancelled(VanetSimError):
    """Raised inside a run when its cancel flag is set."""


class InternalError(VanetSimError):
    """An internal invariant was violated; the run aborts without emitting."""

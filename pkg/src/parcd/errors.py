"""Shared exception types."""


class InvalidParameterError(ValueError):
    """An argument violates an operation's stated precondition."""


class CorruptTraceError(RuntimeError):
    """Replaying a trace did not reproduce the run's final state."""


class EnforcementError(RuntimeError):
    """A run violated an assumption its admission machinery must enforce."""


class UnsupportedScheduleError(ValueError):
    """A diagnostic was asked to run on a trace from the wrong schedule."""

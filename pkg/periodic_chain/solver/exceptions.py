"""
Error hierarchy for the chain solvers.

Every error carries the process exit code the CLI reports for it.
"""


class ChainError(Exception):
    """Base class for all solver errors."""

    exit_code = 1


class ConfigurationError(ChainError, ValueError):
    """Invalid configuration or input data."""

    exit_code = 2


class UsageError(ConfigurationError):
    """An operation was called outside its precondition."""


class ResonanceError(ChainError):
    """A forcing harmonic falls inside the phonon band."""

    exit_code = 3

    def __init__(self, m, message=None):
        self.m = m
        super().__init__(message or f"harmonic m={m} is resonant with the phonon band")


class SpectralError(ChainError):
    """A spectral parameter lies on the band or on a branch cut."""

    exit_code = 3


class BranchCutError(SpectralError):
    pass


class ConvergenceError(ChainError):
    """An iteration failed to converge or diverged."""

    exit_code = 4


class BlowUpError(ConvergenceError):
    """The integrator produced a non-finite state."""

    def __init__(self, last_time, message=None):
        self.last_time = last_time
        super().__init__(message or f"non-finite state after t={last_time!r}")


class SingularError(ChainError):
    """A linear system that must be solved is singular."""

    exit_code = 4


class DegenerateBoundaryError(SingularError):
    pass


class DegenerateProfileError(ChainError):
    """A decay profile underflowed and cannot be fitted."""

    exit_code = 4


class OracleFailure(ChainError):
    """An embedded oracle check disagreed with the solver."""

    exit_code = 5

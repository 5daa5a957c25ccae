"""Exception hierarchy.

Two broad classes matter for the CLI exit codes: bad input (ValidationError,
exit code 2) and a numerical procedure that failed to produce a trustworthy
result (NumericalError, exit code 3).
"""


class SpiralwaveError(Exception):
    """Base class for all package errors."""


class ValidationError(SpiralwaveError):
    """Invalid configuration or arguments."""


class NumericalError(SpiralwaveError):
    """A numerical routine failed (non-convergence, blow-up, ...)."""


class CoreSolveError(NumericalError):
    """Core-profile boundary-value iteration failed."""


class GreensError(NumericalError):
    """Green's function evaluation failed (coincidence, kappa out of range)."""


class WavenumberError(NumericalError):
    """Wavenumber eigenproblem failed (no bracket, degenerate null space)."""


class TrajectoryError(NumericalError):
    """Trajectory integration failed mid-run."""


class SimulationError(NumericalError):
    """Field simulation blew up or produced invalid data."""

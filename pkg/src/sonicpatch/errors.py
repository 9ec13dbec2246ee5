"""Exception hierarchy shared by the solver modules."""


class SonicPatchError(Exception):
    """Base class for all solver errors."""


class DomainError(SonicPatchError, ValueError):
    """Inputs lie outside the region where a formula is defined."""


class SingularityError(SonicPatchError, ZeroDivisionError):
    """A denominator vanished (or came within the guard tolerance).

    ``denominator`` names the offending expression.
    """

    def __init__(self, message, denominator=None):
        super().__init__(message)
        self.denominator = denominator


class SonicDegeneracyError(SonicPatchError):
    """The computation reached the sonic line where hyperbolicity is lost."""


class StepBudgetExceeded(SonicPatchError):
    """An integrator used up its step budget before a stop event fired."""


class ConvergenceError(SonicPatchError):
    """A fixed-point iteration did not converge."""


class MeshError(SonicPatchError):
    """Failure while building the characteristic mesh.

    Carries the mesh coordinates ``(i, j)`` of the offending node when known.
    """

    def __init__(self, message, index=None):
        if index is not None:
            message = f"{message} at mesh node (i={index[0]}, j={index[1]})"
        super().__init__(message)
        self.index = index


class CFLError(SonicPatchError):
    """The requested step violates the characteristic CFL bound."""


class ConfigError(SonicPatchError, ValueError):
    """Malformed or inconsistent solver configuration."""


class NumericalError(SonicPatchError):
    """A computed field went non-finite."""

"""Exception types raised across the package."""


class H2DampError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(H2DampError, ValueError):
    """Model size or index stencil does not fit."""


class ContractViolationError(H2DampError, ValueError):
    """An input violates a documented precondition."""


class FactorizationError(H2DampError, ValueError):
    """A matrix that must be SPD (or invertible) is not."""


class StabilityError(H2DampError):
    """A system matrix that must be Hurwitz is not."""


class PoleCollisionError(H2DampError, ZeroDivisionError):
    """A shift coincides with a pole of the diagonal modal operator."""


class ShiftDegeneracyError(H2DampError):
    """The inner p x p SMW system is numerically singular at a shift."""


class DegenerateInputError(H2DampError, ValueError):
    """All candidate basis columns are numerically zero."""


class ProjectionDegeneracyError(H2DampError):
    """A projected mass or stiffness matrix lost positive definiteness."""


class NonConvergenceError(H2DampError):
    """An iteration failed to produce a usable result."""


class OracleCapError(H2DampError):
    """Full-order oracle refused because the model exceeds the size cap."""

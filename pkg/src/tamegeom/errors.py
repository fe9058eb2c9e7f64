"""Exception types raised across the package."""


class GeometryError(Exception):
    """Base class for all package errors."""


class OutOfDomain(GeometryError):
    """A point lies outside the chart ball."""


class NotSPD(GeometryError):
    """A matrix expected to be symmetric positive definite is not."""


class DimensionMismatch(GeometryError):
    """Two objects disagree on dimension or chart domain."""


class StepTooLarge(GeometryError):
    """A finite-difference stencil would leave the chart ball."""


class BadSymmetry(GeometryError):
    """Curvature data lacks the algebraic symmetries of a curvature tensor."""


class SingularOperator(GeometryError):
    """An operator that should be invertible is numerically singular."""


class DegeneratePlane(GeometryError):
    """Two tangent vectors do not span a plane."""


class LeftDomain(GeometryError):
    """A geodesic left the chart ball before the requested time.

    Parameters
    ----------
    exit_time : float
        Time of the last step that stayed inside the chart.
    """

    def __init__(self, message, exit_time):
        super().__init__(message)
        self.exit_time = float(exit_time)


class StepRejected(GeometryError):
    """An integration step is too large for the chart."""


class NoConvergence(GeometryError):
    """An iterative solver failed to converge.

    Parameters
    ----------
    best_defect : float
        Smallest residual reached before giving up.
    """

    def __init__(self, message, best_defect=float("nan")):
        super().__init__(message)
        self.best_defect = float(best_defect)


class OutOfNormalBall(GeometryError):
    """A point lies outside the region where the exponential map is inverted."""


class NonPositiveInput(GeometryError):
    """A constant that must be positive is not."""


class SingularJacobian(GeometryError):
    """The derivative of a map at its base point is numerically singular."""


class DegenerateForm(GeometryError):
    """An antisymmetric form is degenerate or not antisymmetric."""


class NotTame(GeometryError):
    """An almost complex structure does not tame the symplectic form."""


class NotAlmostComplex(GeometryError):
    """A matrix does not square to minus the identity."""


class SingularA(GeometryError):
    """The operator A of a polar decomposition is singular."""


class SingularMatrix(GeometryError):
    """A matrix is numerically singular."""


class Unclassifiable(GeometryError):
    """An eigenvalue is neither real nor of unit modulus."""


class ConfigError(GeometryError):
    """Invalid experiment configuration.

    Parameters
    ----------
    field : str, optional
        Name of the offending key.
    line : int, optional
        Line number in the config file, when known.
    """

    def __init__(self, message, field=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line

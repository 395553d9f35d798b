"""Exception hierarchy.

Every error raised by the library derives from :class:`CertifyError` so the
CLI can map failures to exit codes without catching unrelated exceptions.
"""


class CertifyError(Exception):
    """Base class for all library errors."""


class InputError(CertifyError, ValueError):
    """Malformed user input (scenario file, expression, parameter)."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


# coefficient fields
class NonInvertibleSigma(CertifyError):
    pass


class InsufficientSmoothness(CertifyError):
    pass


class VanishingDerivative(CertifyError):
    pass


class DegenerateDilatation(CertifyError):
    pass


# geometry
class MeshDegenerate(CertifyError):
    pass


class BoundaryMapError(CertifyError):
    """Base for boundary-map validation failures; ``theta`` names the culprit."""

    def __init__(self, message, theta=None):
        super().__init__(message)
        self.theta = theta


class SelfIntersecting(BoundaryMapError):
    pass


class OrientationReversed(BoundaryMapError):
    pass


class DegenerateTangent(BoundaryMapError):
    pass


# solver
class SingularSystem(CertifyError):
    pass


class SolverDiverged(CertifyError):
    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


# conjugate / topology
class NonClosedForm(CertifyError):
    pass


class UnderSampled(CertifyError):
    pass


class BoundaryCritical(CertifyError):
    pass


class VanishingGradient(CertifyError):
    pass


class PreconditionViolated(CertifyError):
    pass

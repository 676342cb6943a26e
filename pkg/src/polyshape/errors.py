"""Exception hierarchy shared by all modules."""


class PolyshapeError(Exception):
    """Base class for every error raised by this package."""


class JetStructureError(PolyshapeError, ValueError):
    """Jets combined with mismatched base points or orders."""


class SingularJacobian(PolyshapeError, ArithmeticError):
    """A map jet or map has a singular Jacobian where an inverse is needed."""


class NotBiLipschitz(PolyshapeError):
    """A domain map fails the Jacobian-determinant or injectivity check."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DegenerateBoundary(PolyshapeError):
    """Boundary tangent vanished while sampling the image curve."""


class NotCoercive(PolyshapeError, ArithmeticError):
    """Cholesky factorization of the energy matrix failed."""


class ClusterGapError(PolyshapeError):
    """Eigenvalue cluster is not separated well enough for shape derivatives."""


class ConfigError(PolyshapeError, ValueError):
    """Invalid run configuration (CLI exit code 2)."""

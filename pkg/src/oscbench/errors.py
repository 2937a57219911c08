"""Exception types shared across the package."""


class OscbenchError(Exception):
    """Base class for package errors."""


class CertificationError(OscbenchError):
    """A numerical certification (nonvanishing, radius, boundary minimum) failed."""


class SingularSurfacePointError(OscbenchError):
    """A located zero of the form has gradient below the singularity threshold."""


class QuadratureError(OscbenchError):
    """Adaptive quadrature exceeded its subdivision budget."""

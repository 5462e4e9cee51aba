"""Exception types shared across the package."""


class RobinStripError(Exception):
    """Base class for all package-specific errors."""


class ClosureError(RobinStripError):
    """Curvature profile does not integrate to a closed curve."""

    def __init__(self, residual: float, tol: float):
        self.residual = residual
        self.tol = tol
        super().__init__(
            f"curve fails to close: |sigma(L)-sigma(0)| = {residual:.3e} > tol {tol:.3e}"
        )


class SelfIntersectionError(RobinStripError):
    """Curve intersects itself (violates the simple-curve hypothesis)."""


class DegenerateCurve(RobinStripError):
    """Local offset Jacobian 1 + kappa*t vanishes at the requested width."""


class WidthExceedsCritical(RobinStripError):
    """Requested strip width is at or beyond the critical width d*."""


class MeshTooCoarse(RobinStripError):
    """Fewer elements than the minimum needed for a trustworthy solve."""


class JacobianNonPositive(RobinStripError):
    """A quadrature point has 1 + kappa*t <= 0; parallel coordinates invalid."""


class SingularShift(RobinStripError):
    """A - shift*M is (numerically) singular; perturb the shift and retry."""


class NoConvergence(RobinStripError):
    """Eigenvalue iteration failed; carries the iteration log."""

    def __init__(self, message: str, log: dict | None = None):
        self.log = log or {}
        super().__init__(message)


class CurvatureCapViolated(RobinStripError):
    """max kappa exceeds the reference circle curvature kappa_circ."""


class OrthogonalityTooWeak(RobinStripError):
    """Orthogonality residuals too large to certify the min-max bound."""


class SecondBoundStateAbsent(RobinStripError):
    """The reference disk has no second negative eigenvalue at this alpha."""


class ConfigError(RobinStripError):
    """Malformed or unknown experiment configuration."""

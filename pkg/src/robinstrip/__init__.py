"""Robin Laplacian eigenvalues on curved strips and convex exteriors.

Builds smooth closed curves from curvature profiles, solves the Robin
eigenproblem on fixed-width strips and truncated exteriors in parallel
coordinates (2-D FEM and 1-D angular fibers), and verifies the
annulus/disk maximization inequalities with certified tolerances.
"""

from .errors import (
    ClosureError,
    ConfigError,
    CurvatureCapViolated,
    DegenerateCurve,
    JacobianNonPositive,
    MeshTooCoarse,
    NoConvergence,
    OrthogonalityTooWeak,
    RobinStripError,
    SecondBoundStateAbsent,
    SelfIntersectionError,
    SingularShift,
    WidthExceedsCritical,
)
from .geometry import (
    CurvatureProfile,
    CurvatureStats,
    Mode,
    PlanarCurve,
    StripDomainSpec,
    angle_condition,
    build_curve,
    critical_width,
    curvature_stats,
    offset_boundary,
    offset_injective,
    read_profile,
    validate_strip,
)
from .eig import (
    Factorization,
    GeneralizedEigResult,
    SymmetricBandedMatrix,
    banded_inertia,
    factorize_shifted,
    shift_inertia,
    smallest_eigenpairs,
)
from .fiber import (
    FiberProblem,
    RadialEigenfunction,
    Spectrum,
    angular_project,
    annulus_spectrum,
    assemble_fiber,
    count_negative,
    disk_exterior_spectrum,
    graded_mesh,
    lambda2_vs_perimeter,
    resolve_truncation,
    secular_oracle,
    solve_fiber,
)
from .strip2d import (
    ConvergenceReport,
    StripMesh,
    StripProblem,
    StripSolveResult,
    assemble_strip,
    convergence_report,
    default_truncation,
    quadratic_form_value,
    solve_strip,
)
from .transplant import (
    OrthogonalityResult,
    PerimeterGap,
    RadialProfile,
    RadialProfilePair,
    RayleighReport,
    ground_profile_annulus,
    minmax_upper_bound,
    orthogonality_check,
    perimeter_gap,
    profiles_from_disk,
    rayleigh_u_star,
    rayleigh_v_star,
)

__version__ = "0.1.0"

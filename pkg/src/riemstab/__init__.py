"""Simulation of nonautonomous ODEs on Riemannian manifolds with sampled
numeric checks of Lyapunov-type stability conditions."""

__version__ = "0.1.0"

from .curvature import CurvatureBounds, RadiusInterval, injectivity_interval, sectional_curvature
from .dynamics import (
    Trajectory,
    VectorField,
    eval_field,
    integrate_chart,
    integrate_compactified,
    integrate_pullback,
    pullback_field,
)
from .lyapunov import (
    CheckReport,
    DoaEstimate,
    LyapunovCandidate,
    PolarGrid,
    Verdict,
    check_barrier,
    check_decrease,
    check_properness,
    check_sandwich,
    estimate_doa,
    verify_exponential_bound,
    verify_uniform_attraction,
)
from .manifolds import Euclidean, HalfPlane, ManifoldPoint, Sphere, TangentVec, point, tangent
from .scenarios import (
    Scenario,
    build_example_euclidean,
    build_example_hyperbolic,
    build_linear_oracle,
    build_zero_field,
    load_scenario,
    serialize_scenario,
)

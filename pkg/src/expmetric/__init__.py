"""Numerical toolkit for expanding singular metrics of unicritical
polynomials z^d + c: metric densities, distortion bounds, backward-orbit
expansion ratios, pullback shrinking, path-metric grids, and external-ray
geometry."""

__version__ = "0.1.0"

from .dynamics import (
    OrbitClassification,
    OrbitKind,
    PostcriticalCloud,
    UnicriticalMap,
    build_postcritical_cloud,
    classify_parameter,
    critical_orbit,
    dist_to_cloud,
    green_potential,
    julia_distance_estimate,
    orbit_derivative_magnitude,
    sample_julia_points,
)
from .metrics import (
    KoebeBounds,
    SingularMetric,
    Variant,
    comparison_F,
    comparison_F_closed_form,
    density_from_conformal_radius,
    hyperbolic_density_disk,
    hyperbolic_from_pseudo,
    koebe_bounds,
    orbifold_density_disk,
    pseudo_hyperbolic_disk_center,
    pseudo_hyperbolic_unit,
    series_F_times_power,
)
from .backward import (
    BackwardDiskOrbit,
    CaseLabel,
    ExpansionReport,
    case3_bound_check,
    classify_level,
    conformal_radius_proxy,
    expansion_ratios,
    preimages,
    pull_back,
    shrink_fit,
)
from .gridmetric import (
    HoelderFit,
    PathMetricGrid,
    build_grid,
    grid_distance,
    holder_fit,
    uniform_upper_constant,
    verify_lower_bound,
)
from .rays import (
    ExternalRay,
    JohnReport,
    john_constant_along_ray,
    john_report,
    rho_length_of_ray,
    trace_ray,
)

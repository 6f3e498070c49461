"""Nonlinear potential theory on rooted trees, at desk scale.

p-capacities of boundary sets with equilibrium functions and measures,
Wiener-type irregularity diagnostics, random-walk harmonic measure,
Dirichlet and p-harmonic extension, and Carleson-measure machinery, each
quantity cross-checked by at least two independent computations.
"""

__version__ = "0.1.0"

from .tree_core import (
    BoundarySet,
    ParameterError,
    Ray,
    StructureError,
    Tent,
    Tree,
    TreeSpec,
    build,
    counterexample,
    geodesic_to,
    level_counts,
    path_children,
    spec_from_json,
    spec_to_json,
    tent,
)
from .calculus import (
    Charge,
    Exponent,
    SolverError,
    ValidationError,
    copotential,
    energy,
    footnote_map,
    forward_defect,
    gradient,
    level_sums,
    mutual_energy,
    p_laplacian,
    potential,
    signed_pow,
    subtree_sum,
    tail_energies,
)
from .capacity import (
    EquilibriumResult,
    capacity_optimize,
    capacity_recursive,
    dual_admissibility_check,
    relative_capacity,
    rescaling_residuals,
    spherical_capacity,
)
from .wiener import (
    WienerReport,
    capacity_form_terms,
    deficit,
    sweep_verdict,
    wiener_series,
    wiener_sweep,
)
from .stochastic import (
    HarmonicMeasure,
    WalkEstimate,
    capacity_escape_identity,
    harmonic_measure_exact,
    resolve_threads,
    simulate_escape,
)
from .dirichlet import (
    BoundaryData,
    BoundaryRule,
    boundary_coordinates,
    mean_value_residual,
    p_harmonic_extension,
    poisson,
    regular_convergence,
)
from .sobolev_carleson import (
    CarlesonReport,
    capacity_via_carleson,
    carleson_norm,
    gram_solve,
    leaf_potential_values,
    radial_variation,
    sobolev_norm,
    uniqueness_gap,
)

__all__ = [
    "__version__",
    "BoundarySet", "ParameterError", "Ray", "StructureError", "Tent", "Tree",
    "TreeSpec", "build", "counterexample", "geodesic_to", "level_counts",
    "path_children", "spec_from_json", "spec_to_json", "tent",
    "Charge", "Exponent", "SolverError", "ValidationError", "copotential",
    "energy", "footnote_map", "forward_defect", "gradient", "level_sums",
    "mutual_energy", "p_laplacian", "potential", "signed_pow", "subtree_sum",
    "tail_energies",
    "EquilibriumResult", "capacity_optimize", "capacity_recursive",
    "dual_admissibility_check", "relative_capacity", "rescaling_residuals",
    "spherical_capacity",
    "WienerReport", "capacity_form_terms", "deficit", "sweep_verdict",
    "wiener_series", "wiener_sweep",
    "HarmonicMeasure", "WalkEstimate", "capacity_escape_identity",
    "harmonic_measure_exact", "resolve_threads", "simulate_escape",
    "BoundaryData", "BoundaryRule", "boundary_coordinates",
    "mean_value_residual", "p_harmonic_extension", "poisson",
    "regular_convergence",
    "CarlesonReport", "capacity_via_carleson", "carleson_norm", "gram_solve",
    "leaf_potential_values", "radial_variation", "sobolev_norm",
    "uniqueness_gap",
]

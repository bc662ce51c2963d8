"""Heavy ball rolling without sliding on a rotating surface of revolution.

Reduced dynamics, first integrals, leafwise effective potentials, relative
equilibria with their leafwise stability, closed forms for the paraboloid and
a general constrained-dynamics engine used to lift reduced solutions.
"""

from .config import RunConfig, load_config, make_rng
from .engine import (
    QuasiVelocitySystem,
    ball_system,
    constrained_field,
    estimate_period_and_rotation,
    reaction_force,
    reconstruct,
)
from .equilibria import (
    EquilibriumRecord,
    branch_signature,
    equilibria_on_leaf,
    omega_tilde,
    omega_tilde_m,
    re1_re2_records,
    re3_omega_n,
    re3_record,
    scan_leaf_counts,
    stability_S,
)
from .errors import (
    RollballError,
    InvalidProfileError,
    DomainError,
    ChartDomainError,
    FamilyDomainError,
    DegenerateBranchError,
    PreconditionError,
    ConfigurationError,
    EvaluationError,
    IntegrationError,
    ConsistencyError,
    NumericalInconsistencyError,
    NearSingularConstraintError,
)
from .leaf import LeafSystem, effective_potential, integrate_leaf, leaf_for_state, poisson_apply
from .model import EXACT, TermModel
from .parabolic import ParabolicClosedForm, oracle_compare, parabolic_asymptotics_check
from .reduced import Trajectory, integrate_reduced, to_p5, to_polar, vector_field_p5, vector_field_polar
from .routh import RouthSolution, build_routh_solution, conservation_report, moving_energy, routh_J
from .surface import (
    ParabolicProfile,
    Params,
    PlaneProfile,
    PolynomialProfile,
    Profile,
    TabulatedProfile,
    check_admissibility,
    eval_profile,
    eval_psi,
    profile_from_spec,
)

__version__ = "0.1.0"

__all__ = [
    "RunConfig",
    "load_config",
    "make_rng",
    "QuasiVelocitySystem",
    "ball_system",
    "constrained_field",
    "estimate_period_and_rotation",
    "reaction_force",
    "reconstruct",
    "EquilibriumRecord",
    "branch_signature",
    "equilibria_on_leaf",
    "omega_tilde",
    "omega_tilde_m",
    "re1_re2_records",
    "re3_omega_n",
    "re3_record",
    "scan_leaf_counts",
    "stability_S",
    "RollballError",
    "InvalidProfileError",
    "DomainError",
    "ChartDomainError",
    "FamilyDomainError",
    "DegenerateBranchError",
    "PreconditionError",
    "ConfigurationError",
    "EvaluationError",
    "IntegrationError",
    "ConsistencyError",
    "NumericalInconsistencyError",
    "NearSingularConstraintError",
    "LeafSystem",
    "effective_potential",
    "integrate_leaf",
    "leaf_for_state",
    "poisson_apply",
    "EXACT",
    "TermModel",
    "ParabolicClosedForm",
    "oracle_compare",
    "parabolic_asymptotics_check",
    "Trajectory",
    "integrate_reduced",
    "to_p5",
    "to_polar",
    "vector_field_p5",
    "vector_field_polar",
    "RouthSolution",
    "build_routh_solution",
    "conservation_report",
    "moving_energy",
    "routh_J",
    "ParabolicProfile",
    "Params",
    "PlaneProfile",
    "PolynomialProfile",
    "Profile",
    "TabulatedProfile",
    "check_admissibility",
    "eval_profile",
    "eval_psi",
    "profile_from_spec",
]

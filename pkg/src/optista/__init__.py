"""OptISTA and reference proximal-gradient methods, with their certificates.

Submodules
----------
schedules     theta, gamma and OPPA step schedules
simplexqp     concave quadratic maximization over the simplex
oracles       gradient and prox oracles, test instances
methods       OptISTA, FISTA, ISTA, OGM, FGM, OPPA, Guler, generic FSFOM
certificates  PEP dual certificate and Lyapunov sequence
lowerbounds   zero-chain worst-case instances and matching-bound checks
cli           ``optista`` command-line entry point
"""

from .schedules import (
    HorizonError,
    composite_zeta,
    gamma_schedule,
    oppa_schedule,
    proximal_zeta,
    theta_schedule,
)
from .oracles import CompositeProblem, build_instance, random_box_quadratic, random_lasso
from .methods import (
    METHODS,
    Trajectory,
    method_bound,
    optista_bound,
    run_fista,
    run_ista,
    run_method,
    run_optista,
    run_optista_a,
)
from .certificates import analytic_certificate, lyapunov_sequence, verify_certificate
from .lowerbounds import (
    ConstructionError,
    build_composite_worst_case,
    build_proximal_worst_case,
    matching_bound_report,
    proximal_matching_report,
)

__version__ = "0.1.0"

__all__ = [
    "HorizonError",
    "composite_zeta",
    "gamma_schedule",
    "oppa_schedule",
    "proximal_zeta",
    "theta_schedule",
    "CompositeProblem",
    "build_instance",
    "random_box_quadratic",
    "random_lasso",
    "METHODS",
    "Trajectory",
    "method_bound",
    "optista_bound",
    "run_fista",
    "run_ista",
    "run_method",
    "run_optista",
    "run_optista_a",
    "analytic_certificate",
    "lyapunov_sequence",
    "verify_certificate",
    "ConstructionError",
    "build_composite_worst_case",
    "build_proximal_worst_case",
    "matching_bound_report",
    "proximal_matching_report",
]

"""Order-robust selection from sequentially revealed boxes.

Exact evaluators, adaptive target policies, guarantee-certifying densities,
and the finite programs that pin down what any order-unaware policy can
achieve.
"""

from __future__ import annotations

from .benchmarks import (
    ArrivalOrder,
    Box,
    EvaluationResult,
    Instance,
    OrderError,
    ThresholdChoice,
    best_single_threshold,
    instance_max_distribution,
    opt_online,
    prophet_value,
    sta_exact,
    sta_lower_bound,
)
from .densities import (
    DensityPiece,
    DensitySpec,
    GuaranteeCheck,
    PHI,
    density_cdf,
    density_pdf,
    density_ppf,
    integrate_weighted,
    point_density,
    rho_656,
    rho_732,
    sample_density,
    solve_c_656,
    solve_c_732,
    verify_guarantee,
)
from .distributions import DiscreteDistribution
from .hardness import (
    DetectionHardInstance,
    DualCertificate,
    GeneralDualReport,
    GeneralHardInstance,
    HardnessParameterError,
    TvdDualReport,
    build_primal_general,
    build_primal_tvd,
    detection_formula,
    detection_hard_order,
    detection_opt_prediction,
    free_after_order,
    free_last_order,
    general_opt_prediction,
    make_detection_hard_instance,
    make_general_hard_instance,
    solve_c_detection,
    tvd_on_detection_order,
    verify_dual_general,
    verify_dual_tvd,
)
from .io import InstanceFormatError, load_instance, parse_instance
from .policies import (
    Decision,
    PolicyError,
    PolicyState,
    QuadratureValue,
    randomized_value,
    run_policy_sampled,
    tva_exact,
    tva_step,
    tvd_exact,
    tvd_step,
)
from .simplex import FiniteLP, InfeasibleError, LPSolution, UnboundedError, simplex_solve

__all__ = [
    "ArrivalOrder",
    "Box",
    "Decision",
    "DensityPiece",
    "DensitySpec",
    "DetectionHardInstance",
    "DiscreteDistribution",
    "DualCertificate",
    "EvaluationResult",
    "FiniteLP",
    "GeneralDualReport",
    "GeneralHardInstance",
    "GuaranteeCheck",
    "HardnessParameterError",
    "InfeasibleError",
    "Instance",
    "InstanceFormatError",
    "LPSolution",
    "OrderError",
    "PHI",
    "PolicyError",
    "PolicyState",
    "QuadratureValue",
    "ThresholdChoice",
    "TvdDualReport",
    "UnboundedError",
    "best_single_threshold",
    "build_primal_general",
    "build_primal_tvd",
    "density_cdf",
    "density_pdf",
    "density_ppf",
    "detection_formula",
    "detection_hard_order",
    "detection_opt_prediction",
    "free_after_order",
    "free_last_order",
    "general_opt_prediction",
    "instance_max_distribution",
    "integrate_weighted",
    "load_instance",
    "make_detection_hard_instance",
    "make_general_hard_instance",
    "opt_online",
    "parse_instance",
    "point_density",
    "prophet_value",
    "randomized_value",
    "rho_656",
    "rho_732",
    "run_policy_sampled",
    "sample_density",
    "simplex_solve",
    "solve_c_656",
    "solve_c_732",
    "solve_c_detection",
    "sta_exact",
    "sta_lower_bound",
    "tva_exact",
    "tva_step",
    "tvd_exact",
    "tvd_on_detection_order",
    "tvd_step",
    "verify_dual_general",
    "verify_dual_tvd",
    "verify_guarantee",
]

"""Tail asymptotics of random contractions ``R * S_1 * ... * S_n`` with exact oracles."""
__version__ = "0.1.0"

from .dist_model import (
    DistributionSpec,
    Frechet,
    Gumbel,
    MCEstimate,
    ScalingSpec,
    Weibull,
    as_scaling,
    aux_scale_from_mean_excess,
    make_builtin,
    mean_excess,
    normalize_endpoint,
    power_scale,
)
from .errors import (
    ContractionError,
    DomainError,
    ParameterError,
    PreAsymptoticError,
    PreconditionError,
    QuadratureError,
    RarityError,
    UnreliableRegionError,
)
from .asymptotics import (
    ApproxResult,
    ProductModel,
    breiman_tail,
    cte_asymptotic,
    cte_var_ratio,
    frechet_density_ratio,
    gumbel_density,
    gumbel_product_tail,
    vm_density_ratio_check,
    weibull_density_ratio,
    weibull_product_tail,
)
from .oracle import (
    ConvergenceReport,
    convergence_report,
    exact_density_quadrature,
    exact_tail_nfold,
    exact_tail_quadrature,
    mc_tail,
)
from .subexp import (
    CriterionTrajectory,
    conv_square_ratio,
    dominated_variation_trajectory,
    goldie_resnick_check,
    long_tail_trajectory,
    mitra_resnick_trajectory,
    tony_integral_trajectory,
)
from .risk import RiskModel, RuinResult, ruin_asymptotic, ruin_prob_mc, ruin_term_sum, simulate_wealth_path
from .aggregation import (
    LocalGSpec,
    ScaleMixture,
    asymptotic_independence_diagnostic,
    berman_identity_check,
    dirichlet_mixture,
    local_spec_from_density,
    s_rho_tail,
    sample_pair,
    spherical_mixture,
    u_rho_tail_frechet,
    u_rho_tail_gumbel,
    u_rho_tail_weibull,
)

"""Regular consumption processes for stochastic money accounts."""

from .actuarial import (
    AnnuityBasis,
    BonusFund,
    BonusSchedule,
    DrawdownPlan,
    annuity_certain,
    bonus_constants,
    bonus_schedule,
    drawdown_initial_rate,
    drawdown_solve_limit,
)
from .core import (
    AccountState,
    absolute_from_relative,
    account_closed_form,
    check_regular,
    evolve_account,
    is_regular,
    relative_from_absolute,
    rescale,
)
from .engine import (
    ConditionalExpectation,
    ConditionalQuantile,
    ConsumptionSolution,
    PHPPSpec,
    ScaledExpectationRatio,
    VerificationReport,
    phpp_from_process,
    solve,
    verify,
)
from .errors import (
    CapacityError,
    DegeneratePlanError,
    DomainError,
    InfeasibleError,
    InputError,
    NotExtractableError,
    NotRepresentableError,
    PHPPError,
    RegularityError,
)
from .iid import (
    PerpetualPlan,
    ProjectionConstants,
    constants_from_rates,
    consumption_coefficients,
    perpetual_z0_max,
    perpetual_z_sequence,
    rates_from_constants,
    x_closed_form,
)
from .lattice import ScenarioTree, build_binomial
from .stochastic import (
    FixedRate,
    LogNormal,
    TwoPoint,
    inv_norm_cdf,
    mean_growth_constant,
    quantile_growth_constant,
    simulate_paths,
)

__version__ = "0.1.0"

"""Exit times of jump diffusions driven by light-tailed Levy noise."""

__version__ = "0.1.0"

from .asymptotics import (
    RatePrediction,
    Regime,
    box_simplex_min,
    d_alpha_closed,
    d_alpha_variational,
    lemma31_bounds,
    phi,
    rate_constant,
    simplex_min_brute,
    simplex_min_closed,
)
from .dynamics import (
    ExitRecord,
    ExitSide,
    Mode,
    Potential,
    SimConfig,
    check_assumption_U,
    ode_flow,
    simulate_exit,
)
from .errors import (
    ConfigurationError,
    DomainError,
    EstimationError,
    InfeasibleError,
    LevyExitError,
    ParameterError,
    SamplerError,
)
from .experiments import (
    EstimateResult,
    FitResult,
    SurvivalReport,
    SweepPlan,
    derive_seed,
    estimate,
    fit_log_rate,
    run_batch,
    start_point_sweep,
    summarize,
    survival_check,
)
from .measures import (
    LevyTriplet,
    TailKind,
    TailSpec,
    log_tail,
    mass_above,
    quantile,
    sample_large_jump,
    sample_large_jumps,
    second_moment_below,
    tail_mass,
)
from .processes import (
    Decomposition,
    PathEvents,
    big_sum_bound,
    decompose,
    sample_large_path,
    small_sup_bound,
)

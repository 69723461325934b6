"""Two-user uplink NOMA with QAM inputs: provably optimal power/phase
scaling via punched Farey sequences, rate allocation under a sum-rate
constraint, and Monte Carlo BER validation against orthogonal baselines."""

from .design import (
    ChannelRealization,
    ConstellationPair,
    DesignCase,
    DesignResult,
    DifferentialPair,
    NormalizedChannel,
    PowerBudget,
    amplitude_cap,
    case_thresholds,
    design_weights,
    grid_search_oracle,
    interval_optimum,
    min_distance_bruteforce,
    min_distance_farey,
    normalize,
    oma_min_distance,
    pam_alphabet,
    sum_constellation,
    verify_superiority,
)
from .errors import (
    BothZero,
    BoundTooLarge,
    ConfigInvalid,
    InvariantViolation,
    NomaQamError,
    NotADivisor,
    PropertyViolation,
    SilentUser,
    SuperiorityViolated,
    ValidationError,
)
from .farey import (
    Fraction,
    PropertyReport,
    PunchedFareySequence,
    enumerate_punched_farey,
    locate_interval,
    make_fraction,
    mediant,
    verify_properties,
)
from .rate import (
    RateAllocation,
    RateProblem,
    asymptotic_rate_allocation,
    beta,
    enumerate_rate_allocations,
    gamma_breakpoints,
    optimal_rate_allocation,
)
from .sim import (
    BerCurve,
    BerPoint,
    SimConfig,
    curves_to_csv,
    detect_ml_joint,
    detect_noma,
    modulate_noma,
    noma_candidates,
    run_scheme_symbol,
    sample_rayleigh,
    simulate_ber,
    snr_to_sigma,
    wilson_halfwidth,
)

__version__ = "0.1.0"

"""Drive-protocol construction and exact evolution for engineered symmetry ladders."""

from .errors import (
    AlgebraMismatch,
    AntiunitaryUnsupported,
    BranchAmbiguity,
    ConditionViolated,
    DimensionMismatch,
    DimensionOverflow,
    EmptyGenerators,
    HsymError,
    IllConditionedFit,
    LeadingOrderMismatch,
    NonHermitian,
    NormDrift,
    SectorEmpty,
    TruncationUnsupported,
)
from .config import (
    ConfigError,
    ExperimentConfig,
    load_config,
    parse_overrides,
    validate_config,
)
from .effective import (
    EffectiveSeries,
    bch_symbolic,
    default_t_grid,
    dense_floquet_unitary,
    extract_orders,
    matrix_log_effective,
    order_accuracy_slope,
    projection_coefficient,
    series_residual,
)
from .operators import (
    CLOCK,
    PAULI,
    OperatorExpr,
    clock_label,
    clock_term,
    commutator,
    frobenius_norm,
    pauli_sum,
    sigma,
)
from .observables import (
    ClockPopulation,
    ExpectationOf,
    NormalizedExpectation,
    ParticipationEntropy,
    SiteDensity,
    autocorrelation,
    build_evaluators,
    clock_populations,
    expectation,
    infinite_temperature_entropy,
    participation_entropy,
)
from .propagate import (
    DENSE_AUTO_CAP,
    NORM_TOL,
    EnsembleResult,
    EvolutionPlan,
    Trajectory,
    canonical_method,
    compile_branch_unitaries,
    compile_period_unitary,
    default_sample_times,
    default_workers,
    evolve,
    evolve_ensemble,
    read_trajectory_csv,
    write_trajectory_csv,
)
from .scaling import (
    Censored,
    PowerLawFit,
    decay_rate,
    fgr_exponent,
    fit_power_law,
    lifetime,
    lifetime_with_bootstrap,
    threshold_stability,
)
from .sequences import (
    CONDITION_TOL,
    DriveSequence,
    RandomDrive,
    Segment,
    build_arbitrary_order,
    build_generalization1,
    build_generalization2,
    build_kicked,
    build_recursive,
    build_shortened_level2,
    build_shortened_level3,
    build_two_block_14,
    reverse_conjugate,
    segments_from_dseq,
    sequence_length,
    validate_condition,
)
from .symmetry import (
    FAIL_TOL,
    PASS_TOL,
    CertReport,
    LadderEntry,
    LadderReport,
    SymmetryGroup,
    SymmetryLadder,
    certify_commutes,
    certify_ladder,
    classify,
    relative_commutator_norm,
)

__version__ = "0.1.0"

"""Trajectory predictive control: predictors, control laws, and benchmarks."""

from .control import (
    QuadraticCost,
    TpcGain,
    control_delta0,
    control_relaxed,
    make_gain,
    reference_preview,
)
from .decomp import LQDecomposition, blt_project, is_blt, lq_decompose, ls_fit
from .errors import (
    DimensionError,
    InsufficientDataError,
    NotConvergedError,
    RankDeficientError,
    SingularSystemError,
    TpcError,
)
from .hankel import (
    HankelSet,
    PredictorKind,
    TrajectoryData,
    build_hankel,
    has_full_row_rank,
    load_trajectory,
    min_examples,
    param_count,
    save_trajectory,
)
from .predictors import (
    Predictor,
    PhiTriple,
    error_covariance,
    fit_fixed_length,
    fit_multistep,
    fit_predictor,
    fit_subspace,
    fit_subspace_lq,
    fit_transient,
    load_predictor,
    predict,
    save_predictor,
    select_memory,
    test_rmse,
)
from .simbench import (
    ExperimentConfig,
    LqgOracle,
    PlantModel,
    ReferenceSignal,
    RunResult,
    SweepSummary,
    collect_training_data,
    derive_rng,
    design_lqg,
    double_integrator_plant,
    generate_reference,
    lqg_control,
    monte_carlo,
    plant_step,
    run_closed_loop,
)
from .statespace import (
    InnovationsModel,
    assemble_system,
    build_phi,
    fit_onestep,
    fit_statespace,
    simulate_innovations,
    verify_theorem3,
)

__version__ = "0.1.0"

"""Model-free adaptive control toolkit.

Full-form dynamic-linearization control for square MIMO discrete-time
plants: recursive pseudo-Jacobian estimation, the coupling-preserving
matrix-inverse control law next to its scalar-denominator baseline, a
deterministic closed-loop simulator, spectral-radius stability diagnostics
and a CLI for reproducible experiments.
"""

from .controller import (
    ControllerConfig,
    control_increment,
    control_increment_baseline,
    control_increment_proposed,
    gain_from_block,
    gain_matrix,
)
from .estimator import EstimatorConfig, maybe_reset, update_pjm
from .ffdl import (
    Dimensions,
    HistoryWindow,
    Pjm,
    assemble_delta_regressor,
    pjm_flatten,
    pjm_from_flat,
    predict_one_step,
)
from .plants import (
    Benchmark10,
    LtiPlant,
    ffdl_residual_check,
    mean_value_jacobian_blocks,
    reference_signals,
    simulate_open_loop,
    solve_eta_min_norm,
)
from .simulation import (
    Benchmark10Spec,
    ConstantReference,
    CustomPlantSpec,
    DivergenceError,
    Example1Reference,
    LoopConfig,
    LtiSpec,
    Metrics,
    SimulationTrace,
    active_engine,
    available_engines,
    compare_controllers,
    compute_metrics,
    run_closed_loop,
)
from .stability import (
    StabilityReport,
    build_companion_matrix,
    d4_quantity,
    evaluate_trace,
    lambda_min_search,
    regularized_inverse_norm_identity_check,
    spectral_radius,
)

__version__ = "0.1.0"

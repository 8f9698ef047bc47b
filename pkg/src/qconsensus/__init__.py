"""Rate-optimal quantization schedules for finite-horizon average consensus."""

from .graph import (
    Graph,
    complete_graph,
    cycle_graph,
    generate_connected_rgg,
    generate_rgg,
    is_connected,
    metropolis_weights,
    path_graph,
    second_eigenvalue,
)
from .optimizer import (
    GgpSolution,
    InfeasibleTargetError,
    solve,
    solve_constant_distortion,
    solve_variable_distortion,
    solve_with_node_constraints,
)
from .rate_model import RdModel, aggregate_rate, d_max_from_nonzero_rule, ecsq_rate_constant, rate_of
from .state_evolution import (
    DistortionSchedule,
    GgpProblem,
    MomentState,
    emse,
    extract_ggp,
    initial_state,
    lossless_mse,
    lossless_mse_sequence,
    network_mse,
    node_mse,
    marginal_variance,
    propagate,
    signal_plus_noise_state,
    t_min,
)

__version__ = "0.1.0"

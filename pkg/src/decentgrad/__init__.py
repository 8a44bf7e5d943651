"""decentgrad: simulate decentralized stochastic subgradient methods.

Agents sit on an undirected connected graph, average with their neighbors
through a doubly stochastic mixing matrix each round, and descend along
sampled subgradient selections of nonsmooth finite-sum objectives. Four
methods share the one round structure: dsgd, dsgdm, dsignsgd, and dsgd_t
(gradient tracking).
"""

from .engine import AlgorithmConfig, NoiseSpec, consensus_step, dsgd_step, momentum_step, run, tracking_step
from .diagnostics import (
    DecayReport,
    RunTrace,
    consensus_decay_check,
    consensus_error,
    disagreement,
    interpolated_state,
    lyapunov_value,
    write_trace_csv,
)
from .graph import Topology, build_complete, build_random_connected, build_ring, is_connected
from .mixing import MixingMatrix, contraction_factor, from_array, laplacian_weights, metropolis, validate
from .oracle import (
    AgentObjective,
    GlobalObjective,
    SubgradientSample,
    finite_difference_gradient,
    l1_quadratic_problem,
    median_problem,
    relu_mlp_problem,
    sign_select,
    stationarity_measure,
    subgrad,
)
from .schedule import StepSchedule

__version__ = "0.1.0"

__all__ = [
    "AgentObjective",
    "AlgorithmConfig",
    "DecayReport",
    "GlobalObjective",
    "MixingMatrix",
    "NoiseSpec",
    "RunTrace",
    "StepSchedule",
    "SubgradientSample",
    "Topology",
    "build_complete",
    "build_random_connected",
    "build_ring",
    "consensus_decay_check",
    "consensus_error",
    "consensus_step",
    "contraction_factor",
    "disagreement",
    "dsgd_step",
    "finite_difference_gradient",
    "from_array",
    "interpolated_state",
    "is_connected",
    "l1_quadratic_problem",
    "laplacian_weights",
    "lyapunov_value",
    "median_problem",
    "metropolis",
    "momentum_step",
    "relu_mlp_problem",
    "run",
    "sign_select",
    "stationarity_measure",
    "subgrad",
    "tracking_step",
    "validate",
    "write_trace_csv",
    "__version__",
]

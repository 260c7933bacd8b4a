"""Ising measures on regular graphs: exact tree computations, samplers, and
local weak convergence diagnostics."""

__version__ = "0.1.0"

from ._kernels import backend_name
from .graphs import (
    Ball,
    ExpansionReport,
    GraphError,
    RegularGraph,
    ball,
    edge_boundary,
    expansion_lower_bound,
    generate_random_regular,
    girth,
    is_tree_isomorphic,
    k4,
    load_edgelist,
    petersen,
    save_edgelist,
    tree_likeness_fraction,
)
from .tree import (
    IsingParams,
    NonzeroFieldError,
    SizeLimitError,
    TreeFixedPoint,
    TreeMarginal,
    critical_beta,
    dlr_check,
    edge_correlation,
    f_statistic_tree,
    free_boundary_marginal,
    free_energy,
    leaf_field_marginal,
    minus_boundary_marginal,
    mixture_marginal,
    pair_correlation,
    plus_boundary_marginal,
    root_magnetization,
    solve_fixed_point,
)
from .sampling import (
    ChainState,
    SampleBatch,
    SpinConfig,
    exact_distribution,
    glauber_sweep,
    init_chain,
    log_partition,
    sample_conditioned_plus,
    sample_exact,
    sample_unconditioned,
    wolff_step,
)
from .diagnostics import (
    BallLaw,
    ConvergenceReport,
    anticoncentration,
    edge_agreement,
    empirical_ball_law,
    f_census,
    f_disagreement,
    f_indicator,
    local_average_variance,
    mode_A_statistic,
    mode_C_statistic,
    q_hat,
    tv_distance,
)
from .experiments import ExperimentConfig, load_config, parse_config, run_experiment

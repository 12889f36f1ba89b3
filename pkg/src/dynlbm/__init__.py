"""Greedy exact-ICL co-clustering for dynamic bipartite networks.

Rows and columns of an N x M x U interaction count tensor are clustered
jointly with the U time intervals under a Poisson latent block model whose
rates depend on (row cluster, column cluster, time cluster). Parameters are
integrated out against conjugate priors and the resulting integrated
complete-data likelihood (ICL) is maximized greedily.
"""

from .core import (
    BlockStats,
    ContractError,
    CountTensor,
    EventRecord,
    Hyperparams,
    TriPartition,
    block_stats,
    col_profile,
    interval_profile,
    row_profile,
)
from .icl import NEW, IclValue, delta_merge, delta_move, icl_exact, log_dirichlet_multinomial, log_gp_block
from .search import FitResult, SearchConfig, fit, greedy_sweep, merge_pass, multi_restart
from .simulate import GenSpec, adjusted_rand_index, lambda_additive, sample

__version__ = "0.1.0"

__all__ = [
    "BlockStats", "ContractError", "CountTensor", "EventRecord", "Hyperparams", "TriPartition",
    "block_stats", "row_profile", "col_profile", "interval_profile",
    "NEW", "IclValue", "icl_exact", "log_gp_block", "log_dirichlet_multinomial", "delta_move", "delta_merge",
    "SearchConfig", "FitResult", "fit", "greedy_sweep", "merge_pass", "multi_restart",
    "GenSpec", "sample", "lambda_additive", "adjusted_rand_index",
]

"""
Fused Partial Gromov-Wasserstein Solvers

This package compares graphs with node attributes as metric-measure spaces
under unbalanced optimal transport: Frank-Wolfe and entropic (Sinkhorn)
solvers for the penalized (FPGW) and mass-constrained (FMPGW) problems,
barycenters, graph matching and k-means workflows, and a brute-force grid
oracle for checking solvers on tiny instances.
"""

from .barycenter import (BarycenterProblem, BarycenterResult, solve_barycenter_fmpgw,
                         solve_barycenter_fpgw)
from .contraction import Loss, contract, naive_contract
from .errors import (ConfigError, ConstraintError, FpgwError, GraphFormatError,
                     InvalidPlanError, OracleBudgetError, ShapeError, SolverError,
                     UnsupportedLossError)
from .frank_wolfe import gradient_fmpgw, gradient_fpgw, solve_fw_fmpgw, solve_fw_fpgw
from .graphs import Graph, StructureKind, feature_cost, load_graph, save_graph, to_mm_space
from .model import (FusedConfig, MmSpace, SolverReport, TransportPlan, fmpgw_objective,
                    fpgw_objective)
from .pot import MassConstrained, Penalty, PotProblem, solve_exact
from .sinkhorn import solve_sink_fmpgw, solve_sink_fpgw
from .tasks import SolverKind, kmeans_fpgw, match_graphs, pairwise_distance_matrix

__all__ = [
    'BarycenterProblem', 'BarycenterResult', 'solve_barycenter_fmpgw', 'solve_barycenter_fpgw',
    'Loss', 'contract', 'naive_contract',
    'ConfigError', 'ConstraintError', 'FpgwError', 'GraphFormatError', 'InvalidPlanError',
    'OracleBudgetError', 'ShapeError', 'SolverError', 'UnsupportedLossError',
    'gradient_fmpgw', 'gradient_fpgw', 'solve_fw_fmpgw', 'solve_fw_fpgw',
    'Graph', 'StructureKind', 'feature_cost', 'load_graph', 'save_graph', 'to_mm_space',
    'FusedConfig', 'MmSpace', 'SolverReport', 'TransportPlan', 'fmpgw_objective',
    'fpgw_objective',
    'MassConstrained', 'Penalty', 'PotProblem', 'solve_exact',
    'solve_sink_fmpgw', 'solve_sink_fpgw',
    'SolverKind', 'kmeans_fpgw', 'match_graphs', 'pairwise_distance_matrix',
]

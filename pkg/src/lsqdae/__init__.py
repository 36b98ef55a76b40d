"""Least-squares collocation for nonlinear higher-index DAE boundary value problems."""

from .collocation import (BlockJacobian, CollocationScheme, NodeFamily, assemble, gram_matrix,
                          make_scheme, objective)
from .dae import DAESystem, validate_jacobians
from .errors import ArgumentError, DomainError, LsqDaeError, NumericalError
from .gauss_newton import GNConfig, GNTrace, Termination, descent_check, gn_solve
from .lsq import LsqSolution, perturbation_check, solve_block_lsq, solve_lsq, solve_subproblem
from .mesh import (AnsatzElement, AnsatzSpace, Partition, evaluate, interpolate, make_uniform_partition,
                   prolongate, refine_nested, zero_element)
from .metrics import (ConvergenceStudy, ErrorReport, error_norms, estimate_orders, run_convergence_study,
                      run_sv_scan, study_from_csv)
from .multilevel import MultilevelConfig, multilevel_solve
from .problems import (BenchmarkProblem, campbell_moore, get_problem, linear_chain, manufactured_in_space,
                       pendulum)

__version__ = "0.1.0"

"""Bayesian optimization of function networks.

Expensive objectives composed of node functions arranged in a DAG are modeled
with one Gaussian process per node; the expected improvement under the implied
(non-Gaussian) posterior on the leaf is approximated by a deterministic sample
average over quasi-Monte Carlo draws and maximized with multi-restart bounded
quasi-Newton search.
"""

__version__ = "0.1.0"

from .acquisition import (
    FlatGPModel,
    Method,
    SAAConfig,
    ei_closed_form,
    ei_fn_saa,
    fit_flat_model,
    maximize_acquisition,
    suggest,
)
from .gp import GPHyperparameters, NodePosterior, fit_map, matern52_ard, posterior
from .harness import (
    ExperimentConfig,
    RunTrace,
    initial_design,
    run_experiment,
    run_replication,
    write_results,
)
from .netmodel import (
    EvaluationLog,
    NetworkModel,
    fit_network_model,
    ingest,
    path_gradient,
    path_value,
    sample_g,
)
from .network import (
    KnownFunction,
    NetworkProblem,
    NetworkTopology,
    evaluate_network,
    get_problem,
    problem_ids,
    validate_topology,
)
from .numerics import (
    BaseSampleMatrix,
    BoxBounds,
    SimplexConstraint,
    bounded_minimize,
    cholesky_with_jitter,
    gamma_log_density,
    inverse_normal_cdf,
    sobol_normal_matrix,
)

__all__ = [
    "BaseSampleMatrix",
    "BoxBounds",
    "EvaluationLog",
    "ExperimentConfig",
    "FlatGPModel",
    "GPHyperparameters",
    "KnownFunction",
    "Method",
    "NetworkModel",
    "NetworkProblem",
    "NetworkTopology",
    "NodePosterior",
    "RunTrace",
    "SAAConfig",
    "SimplexConstraint",
    "bounded_minimize",
    "cholesky_with_jitter",
    "ei_closed_form",
    "ei_fn_saa",
    "evaluate_network",
    "fit_flat_model",
    "fit_map",
    "fit_network_model",
    "gamma_log_density",
    "get_problem",
    "ingest",
    "initial_design",
    "inverse_normal_cdf",
    "matern52_ard",
    "maximize_acquisition",
    "path_gradient",
    "path_value",
    "posterior",
    "problem_ids",
    "run_experiment",
    "run_replication",
    "sample_g",
    "sobol_normal_matrix",
    "suggest",
    "validate_topology",
    "write_results",
]

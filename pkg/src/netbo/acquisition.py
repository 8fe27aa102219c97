"""Acquisition functions and their maximization.

The network acquisition is expected improvement under the non-Gaussian leaf
posterior, approximated by a deterministic sample average over a fixed matrix of
quasi-Monte Carlo normal draws and maximized with multi-restart bounded
quasi-Newton search. A flat-GP closed-form expected improvement and a uniform
random baseline share the same driver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np
from scipy.stats import qmc

from .errors import AllRestartsFailed, NonFiniteObjective
from .gp import (
    NodePosterior,
    build_node_posterior,
    fit_map,
    posterior_batch,
    posterior_batch_with_gradient,
)
from .netmodel import (
    EvaluationLog,
    NetworkModel,
    path_value_and_gradient_batch,
    path_values_at_candidates,
)
from .network import NetworkProblem
from .numerics import (
    BaseSampleMatrix,
    bounded_minimize,
    normal_cdf,
    normal_pdf,
    sobol_normal_matrix,
)


class Method(str, Enum):
    """Point-selection strategies exposed by the harness and CLI."""

    EIFN = "ei-fn"
    EI = "ei"
    RANDOM = "random"


@dataclass(frozen=True)
class SAAConfig:
    """Sample-average-approximation and restart settings for one suggestion."""

    mc_samples: int = 128
    restarts: int = 10
    raw_candidates: int = 512
    seed: int = 0

    def __post_init__(self):
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.raw_candidates < self.restarts:
            raise ValueError("raw_candidates must be >= restarts")


@dataclass(frozen=True)
class FlatGPModel:
    """Single GP over x -> objective, the standard ignore-the-network baseline."""

    problem: NetworkProblem
    node: NodePosterior
    log: EvaluationLog

    @property
    def incumbent(self) -> float:
        return self.log.incumbent_value


def fit_flat_model(
    problem: NetworkProblem,
    points: np.ndarray,
    node_values: np.ndarray,
    fit_seed: int = 0,
) -> FlatGPModel:
    """Fit the flat baseline on decision points and observed leaf values only."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    node_values = np.atleast_2d(np.asarray(node_values, dtype=float))
    log = EvaluationLog(points=points, node_values=node_values)
    ranges = [
        (problem.bounds.lower[d], problem.bounds.upper[d])
        for d in range(problem.decision_dim)
    ]
    hyper = fit_map(points, node_values[:, -1], ranges=ranges, seed=fit_seed)
    node = build_node_posterior(hyper, points, node_values[:, -1])
    return FlatGPModel(problem=problem, node=node, log=log)


def ei_closed_form(mean: float, std: float, g_star: float) -> float:
    """Classical expected improvement of N(mean, std^2) over incumbent g_star."""
    if std < 0.0:
        raise ValueError("std must be nonnegative")
    improvement = mean - g_star
    if std == 0.0:
        return max(improvement, 0.0)
    u = improvement / std
    return float(improvement * normal_cdf(u) + std * normal_pdf(u))


def ei_fn_saa(
    model: NetworkModel,
    x: np.ndarray,
    base_samples: Union[BaseSampleMatrix, np.ndarray],
    g_star: float,
) -> tuple:
    """Sample-average expected improvement for the network posterior at x.

    value = mean over base samples of max(path value - g_star, 0); the gradient
    averages the sample-path gradients over strictly improving samples, taking
    the zero element of the subdifferential at the kink. Deterministic given the
    base-sample matrix.
    """
    z_mat = base_samples.values if isinstance(base_samples, BaseSampleMatrix) else base_samples
    values, grads = path_value_and_gradient_batch(model, x, z_mat)
    improvements = values - g_star
    active = improvements > 0.0
    m = z_mat.shape[0]
    value = float(np.sum(improvements[active])) / m
    gradient = grads[active].sum(axis=0) / m if np.any(active) else np.zeros(len(np.atleast_1d(x)))
    return value, gradient


def _ei_fn_values_at(model, candidates, z_mat, g_star) -> np.ndarray:
    paths = path_values_at_candidates(model, candidates, z_mat)
    return np.maximum(paths - g_star, 0.0).mean(axis=1)


def _flat_ei_values_at(flat: FlatGPModel, candidates: np.ndarray, g_star: float) -> np.ndarray:
    means, variances = posterior_batch(flat.node, candidates)
    stds = np.sqrt(variances)
    improvements = means - g_star
    out = np.maximum(improvements, 0.0)
    live = stds > 1e-12
    u = improvements[live] / stds[live]
    out[live] = improvements[live] * normal_cdf(u) + stds[live] * normal_pdf(u)
    return out


def _flat_ei_value_grad(flat: FlatGPModel, x: np.ndarray, g_star: float) -> tuple:
    mean, var, dmean, dvar = posterior_batch_with_gradient(
        flat.node, np.atleast_2d(np.asarray(x, dtype=float))
    )
    mean, var = float(mean[0]), float(var[0])
    std = math.sqrt(max(var, 0.0))
    improvement = mean - g_star
    if std < 1e-12:
        if improvement > 0.0:
            return improvement, dmean[0]
        return 0.0, np.zeros_like(dmean[0])
    u = improvement / std
    dstd = dvar[0] / (2.0 * std)
    value = improvement * float(normal_cdf(u)) + std * float(normal_pdf(u))
    gradient = float(normal_cdf(u)) * dmean[0] + float(normal_pdf(u)) * dstd
    return value, gradient


def feasible_uniform(
    problem: NetworkProblem, rng: np.random.Generator, n: int
) -> np.ndarray:
    """n iid uniform points over the feasible set (rejection under a budget)."""
    if problem.constraint is None:
        return problem.bounds.sample(rng, n)
    out = []
    while sum(len(b) for b in out) < n:
        batch = problem.bounds.sample(rng, max(n, 64))
        mask = batch.sum(axis=1) <= problem.constraint.cap
        out.append(batch[mask])
    return np.vstack(out)[:n]


def feasible_sobol(problem: NetworkProblem, seed: int, n: int) -> np.ndarray:
    """n scrambled-Sobol points over the feasible set (rejection under a budget)."""
    engine = qmc.Sobol(d=problem.decision_dim, scramble=True, seed=seed)
    lower, span = problem.bounds.lower, problem.bounds.span
    out = []
    have = 0
    while have < n:
        draw = 1 << max(6, int(math.ceil(math.log2(max(n - have, 1)))))
        batch = lower + engine.random(draw) * span
        if problem.constraint is not None:
            batch = batch[batch.sum(axis=1) <= problem.constraint.cap]
        out.append(batch)
        have += len(batch)
    return np.vstack(out)[:n]


def maximize_acquisition(
    evaluator: Callable[[np.ndarray], tuple],
    problem: NetworkProblem,
    cfg: SAAConfig,
    rng: np.random.Generator,
    batch_value_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> tuple:
    """Maximize an acquisition over the feasible set.

    Scores ``raw_candidates`` quasi-random feasible points, refines the top
    ``restarts`` of them with the bounded minimizer on the negated acquisition,
    and returns the best local optimum (ties broken by lowest restart index).
    Deterministic given the generator state.
    """
    candidates = feasible_sobol(problem, int(rng.integers(2**31)), cfg.raw_candidates)
    if batch_value_fn is not None:
        scores = np.asarray(batch_value_fn(candidates), dtype=float)
    else:
        scores = np.array([evaluator(c)[0] for c in candidates], dtype=float)
    order = np.argsort(-scores, kind="stable")[: cfg.restarts]

    def negated(x):
        value, gradient = evaluator(x)
        return -value, -np.asarray(gradient, dtype=float)

    best_x, best_val = None, -np.inf
    failures = 0
    for idx in order:
        try:
            x_opt, neg_val = bounded_minimize(
                negated,
                candidates[idx],
                problem.bounds,
                problem.constraint,
                max_iters=60,
            )
        except NonFiniteObjective:
            failures += 1
            continue
        if -neg_val > best_val:
            best_x, best_val = x_opt, -neg_val
    if best_x is None:
        raise AllRestartsFailed(f"all {failures} restarts raised NonFiniteObjective")
    return best_x, best_val


def suggest(
    method: Method,
    model: Union[NetworkModel, FlatGPModel, NetworkProblem],
    cfg: SAAConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Choose the next evaluation point under the given strategy.

    EIFN draws a fresh base-sample matrix once per suggestion, holds it fixed
    during maximization, and maximizes the deterministic SAA. EI maximizes the
    closed form under the flat model. RANDOM samples uniformly (and takes the
    bare problem instead of a model).
    """
    method = Method(method)
    if method is Method.RANDOM:
        problem = model if isinstance(model, NetworkProblem) else model.problem
        return feasible_uniform(problem, rng, 1)[0]
    if method is Method.EIFN:
        if not isinstance(model, NetworkModel):
            raise TypeError("EIFN requires a NetworkModel")
        g_star = model.incumbent
        base = sobol_normal_matrix(
            cfg.mc_samples, model.problem.node_count, seed=int(rng.integers(2**31))
        )
        x_next, _ = maximize_acquisition(
            lambda x: ei_fn_saa(model, x, base, g_star),
            model.problem,
            cfg,
            rng,
            batch_value_fn=lambda cands: _ei_fn_values_at(model, cands, base.values, g_star),
        )
        return x_next
    if not isinstance(model, FlatGPModel):
        raise TypeError("EI requires a FlatGPModel")
    g_star = model.incumbent
    x_next, _ = maximize_acquisition(
        lambda x: _flat_ei_value_grad(model, x, g_star),
        model.problem,
        cfg,
        rng,
        batch_value_fn=lambda cands: _flat_ei_values_at(model, cands, g_star),
    )
    return x_next

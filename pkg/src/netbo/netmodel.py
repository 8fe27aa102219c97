"""Posterior model of a function network: one GP per surrogate node trained on
the node's observed input/output pairs, with known nodes evaluated analytically
at zero variance.

Sampling the implied posterior on the objective walks the DAG in node order,
drawing each node from its normal posterior given sampled parent values. The
reparametrized form fixes a standard-normal vector Z and turns a draw into the
deterministic, differentiable recursion value = mean + std * Z_k per node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import _kernels
from .errors import InconsistentKnownNode
from .gp import (
    NodePosterior,
    build_node_posterior,
    fit_map,
    posterior_batch,
    posterior_batch_with_gradient,
)
from .network import KnownFunction, NetworkProblem

# Posterior standard deviations below this are treated as exactly zero in the
# path recursion so interpolated points do not inject gradient noise.
SIGMA_SNAP = 1e-12

_DEDUPE_TOL = 1e-10


@dataclass(frozen=True)
class EvaluationLog:
    """History of evaluated points and all node outputs; owns the incumbent."""

    points: np.ndarray  # (n, D)
    node_values: np.ndarray  # (n, K)

    @property
    def n_obs(self) -> int:
        return self.points.shape[0]

    @property
    def incumbent_index(self) -> int:
        if self.n_obs == 0:
            raise ValueError("no observations yet")
        return int(np.argmax(self.node_values[:, -1]))

    @property
    def incumbent_value(self) -> float:
        return float(self.node_values[self.incumbent_index, -1])

    @property
    def incumbent_point(self) -> np.ndarray:
        return self.points[self.incumbent_index].copy()

    def append(self, x: np.ndarray, h: np.ndarray) -> "EvaluationLog":
        return EvaluationLog(
            points=np.vstack([self.points, np.asarray(x, dtype=float)]),
            node_values=np.vstack([self.node_values, np.asarray(h, dtype=float)]),
        )

    @staticmethod
    def empty(decision_dim: int, node_count: int) -> "EvaluationLog":
        return EvaluationLog(
            points=np.zeros((0, decision_dim)), node_values=np.zeros((0, node_count))
        )


@dataclass(frozen=True)
class NetworkModel:
    """Immutable bundle of problem, per-node posterior states, and the log."""

    problem: NetworkProblem
    node_posteriors: tuple  # per node: NodePosterior for surrogates, KnownFunction else
    log: EvaluationLog

    @property
    def incumbent(self) -> float:
        return self.log.incumbent_value


def _dedupe_rows(inputs: np.ndarray, targets: np.ndarray) -> tuple:
    """Drop rows whose inputs duplicate an earlier row (inf-norm within 1e-10)."""
    keep = []
    for i in range(inputs.shape[0]):
        duplicate = False
        for j in keep:
            if np.max(np.abs(inputs[i] - inputs[j])) <= _DEDUPE_TOL:
                duplicate = True
                break
        if not duplicate:
            keep.append(i)
    if len(keep) == inputs.shape[0]:
        return inputs, targets
    return inputs[keep], targets[keep]


def node_training_data(problem: NetworkProblem, log: EvaluationLog, k: int) -> tuple:
    """Training pairs for node k: inputs (x_{I(k)}, parent outputs), targets h_k."""
    coords = list(problem.topology.input_coords[k])
    parents = list(problem.topology.parents[k])
    inputs = np.hstack(
        [log.points[:, coords].reshape(log.n_obs, len(coords)),
         log.node_values[:, parents].reshape(log.n_obs, len(parents))]
    )
    return _dedupe_rows(inputs, log.node_values[:, k].copy())


def _node_ranges(problem: NetworkProblem, log: EvaluationLog, k: int) -> list:
    """Normalization intervals: problem bounds for decision coordinates, the
    running min/max of observed outputs for parent coordinates."""
    ranges = [
        (problem.bounds.lower[d], problem.bounds.upper[d])
        for d in problem.topology.input_coords[k]
    ]
    for j in problem.topology.parents[k]:
        col = log.node_values[:, j]
        ranges.append((float(np.min(col)), float(np.max(col))))
    return ranges


def _node_seed(fit_seed: int, k: int) -> int:
    return int(np.random.SeedSequence([fit_seed & 0x7FFFFFFF, k]).generate_state(1)[0])


def _prior_hyper(problem: NetworkProblem, k: int):
    """Prior-mode hyperparameters for a node with no data yet: unit scale and
    length scales at a third of the decision span (parent spans default to 1)."""
    from .gp import GPHyperparameters

    spans = [
        (problem.bounds.upper[d] - problem.bounds.lower[d]) / 3.0
        for d in problem.topology.input_coords[k]
    ] + [1.0 / 3.0] * len(problem.topology.parents[k])
    return GPHyperparameters(
        constant_mean=0.0, output_scale=1.0, length_scales=np.asarray(spans)
    )


def _refit_all(problem: NetworkProblem, log: EvaluationLog, fit_seed: int) -> tuple:
    posteriors = []
    for k in range(problem.node_count):
        kind = problem.node_kinds[k]
        if kind is not None:
            posteriors.append(kind)
            continue
        if log.n_obs == 0:
            d_in = problem.topology.node_input_dim(k)
            posteriors.append(
                build_node_posterior(_prior_hyper(problem, k), np.zeros((0, d_in)), np.zeros(0))
            )
            continue
        inputs, targets = node_training_data(problem, log, k)
        hyper = fit_map(
            inputs,
            targets,
            ranges=_node_ranges(problem, log, k),
            seed=_node_seed(fit_seed, k),
        )
        posteriors.append(build_node_posterior(hyper, inputs, targets))
    return tuple(posteriors)


def empty_model(problem: NetworkProblem) -> NetworkModel:
    log = EvaluationLog.empty(problem.decision_dim, problem.node_count)
    return NetworkModel(problem=problem, node_posteriors=_refit_all(problem, log, 0), log=log)


def fit_network_model(
    problem: NetworkProblem,
    points: np.ndarray,
    node_values: np.ndarray,
    fit_seed: int = 0,
) -> NetworkModel:
    """Condition a fresh model on a batch of full-network observations."""
    log = EvaluationLog(
        points=np.atleast_2d(np.asarray(points, dtype=float)),
        node_values=np.atleast_2d(np.asarray(node_values, dtype=float)),
    )
    return NetworkModel(
        problem=problem, node_posteriors=_refit_all(problem, log, fit_seed), log=log
    )


def ingest(
    model: NetworkModel, x: np.ndarray, h: np.ndarray, fit_seed: int = 0
) -> NetworkModel:
    """Append one observation, refit every surrogate node, update the incumbent.

    Known nodes are cross-checked against their analytic value (tolerance 1e-9);
    a mismatch means the caller's evaluation disagrees with the registered
    network and raises InconsistentKnownNode.
    """
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    problem = model.problem
    for k, kind in enumerate(problem.node_kinds):
        if kind is None:
            continue
        analytic = kind.fn(problem.node_input(k, x, h))
        if abs(analytic - h[k]) > 1e-9:
            raise InconsistentKnownNode(
                f"node {k}: recorded {h[k]!r} but analytic value is {analytic!r}"
            )
    log = model.log.append(x, h)
    return NetworkModel(
        problem=problem, node_posteriors=_refit_all(problem, log, fit_seed), log=log
    )


# ---------------------------------------------------------------------------
# Posterior sampling and reparametrized paths
# ---------------------------------------------------------------------------


def _known_values(kind: KnownFunction, z: np.ndarray) -> np.ndarray:
    if kind.batch_fn is not None:
        return np.asarray(kind.batch_fn(z), dtype=float)
    return np.fromiter((kind.fn(row) for row in z), dtype=float, count=z.shape[0])


def _known_grads(kind: KnownFunction, z: np.ndarray) -> np.ndarray:
    if kind.batch_grad is not None:
        return np.asarray(kind.batch_grad(z), dtype=float)
    return np.vstack([kind.grad(row) for row in z])


def _assemble_inputs(problem, k, x_rows: np.ndarray, h_cols: np.ndarray) -> np.ndarray:
    coords = list(problem.topology.input_coords[k])
    n_par = len(problem.topology.parents[k])
    b = x_rows.shape[0]
    z = np.empty((b, len(coords) + n_par))
    z[:, : len(coords)] = x_rows[:, coords]
    if n_par:
        z[:, len(coords):] = h_cols
    return z


def sample_g(
    model: NetworkModel,
    x: np.ndarray,
    rng: np.random.Generator,
    size: Optional[int] = None,
) -> Union[float, np.ndarray]:
    """Draw from the posterior on the objective at x by walking the network.

    Each surrogate node is drawn from its normal posterior conditioned on the
    sampled parent values; known nodes evaluate deterministically. With ``size``
    set, returns that many independent draws as an array.
    """
    n = 1 if size is None else int(size)
    x = np.asarray(x, dtype=float)
    x_rows = np.broadcast_to(x, (n, x.size))
    problem = model.problem
    h = np.empty((n, problem.node_count))
    for k in range(problem.node_count):
        parents = list(problem.topology.parents[k])
        z = _assemble_inputs(problem, k, x_rows, h[:, parents])
        state = model.node_posteriors[k]
        if isinstance(state, KnownFunction):
            h[:, k] = _known_values(state, z)
        else:
            means, variances = posterior_batch(state, z)
            h[:, k] = means + np.sqrt(variances) * rng.standard_normal(n)
    leaf = h[:, -1]
    return float(leaf[0]) if size is None else leaf


def _node_path_values(state: NodePosterior, z: np.ndarray, zk: np.ndarray) -> np.ndarray:
    """mean + snapped-std * zk for one surrogate node at stacked input rows z."""
    if (
        _kernels.HAVE_NUMBA
        and state.chol is not None
        and z.shape[0] <= 2048
    ):
        q = np.ascontiguousarray(z / state.hyper.length_scales)
        return _kernels.node_path_value(
            q,
            state.train_scaled,
            state.alpha,
            state.chol.entries,
            state.hyper.output_scale,
            state.hyper.constant_mean,
            np.ascontiguousarray(zk),
            SIGMA_SNAP,
        )
    means, variances = posterior_batch(state, z)
    sigma = np.sqrt(variances)
    sigma[sigma < SIGMA_SNAP] = 0.0
    return means + sigma * zk


def path_value_batch(model: NetworkModel, x: np.ndarray, z_mat: np.ndarray) -> np.ndarray:
    """Reparametrized objective draws at one x for every base-sample row of z_mat."""
    m = z_mat.shape[0]
    x = np.asarray(x, dtype=float)
    x_rows = np.broadcast_to(x, (m, x.size))
    problem = model.problem
    h = np.empty((m, problem.node_count))
    for k in range(problem.node_count):
        parents = list(problem.topology.parents[k])
        state = model.node_posteriors[k]
        if not parents and not isinstance(state, KnownFunction):
            # Root surrogate: input does not depend on the sample, one GP call.
            z1 = x[list(problem.topology.input_coords[k])].reshape(1, -1)
            means, variances = posterior_batch(state, z1)
            sigma = math.sqrt(variances[0])
            if sigma < SIGMA_SNAP:
                sigma = 0.0
            h[:, k] = means[0] + sigma * z_mat[:, k]
            continue
        z = _assemble_inputs(problem, k, x_rows, h[:, parents])
        if isinstance(state, KnownFunction):
            h[:, k] = _known_values(state, z)
        else:
            h[:, k] = _node_path_values(state, z, z_mat[:, k])
    return h[:, -1]


def path_value(model: NetworkModel, x: np.ndarray, z: np.ndarray) -> float:
    """Deterministic sample-path value of the objective at x given fixed normals z."""
    return float(path_value_batch(model, x, np.atleast_2d(np.asarray(z, dtype=float)))[0])


def path_value_and_gradient_batch(
    model: NetworkModel, x: np.ndarray, z_mat: np.ndarray
) -> tuple:
    """Sample-path values and their gradients with respect to x.

    Forward-mode chain rule through the node recursion: each node contributes
    d(mean + std * Z_k)/dz mapped through the Jacobian of its input assembly.
    Returns (values (M,), gradients (M, D)).
    """
    m = z_mat.shape[0]
    x = np.asarray(x, dtype=float)
    dim = x.size
    x_rows = np.broadcast_to(x, (m, dim))
    problem = model.problem
    h = np.empty((m, problem.node_count))
    jac = [None] * problem.node_count  # each (M, D): d h_k / d x
    use_jit = _kernels.HAVE_NUMBA and m <= 2048
    for k in range(problem.node_count):
        coords = list(problem.topology.input_coords[k])
        parents = list(problem.topology.parents[k])
        state = model.node_posteriors[k]
        if not parents and not isinstance(state, KnownFunction):
            # Root surrogate: one GP call; only the Z column varies by sample.
            z1 = x[coords].reshape(1, -1)
            means, variances, dmean, dvar = posterior_batch_with_gradient(state, z1)
            sigma = math.sqrt(max(variances[0], 0.0))
            if sigma < SIGMA_SNAP:
                sigma = 0.0
                dsigma = np.zeros(len(coords))
            else:
                dsigma = dvar[0] / (2.0 * sigma)
            h[:, k] = means[0] + sigma * z_mat[:, k]
            dval_dz = dmean[0][None, :] + z_mat[:, k][:, None] * dsigma[None, :]
            grad_k = np.zeros((m, dim))
            for pos, d in enumerate(coords):
                grad_k[:, d] += dval_dz[:, pos]
            jac[k] = grad_k
            continue
        z = _assemble_inputs(problem, k, x_rows, h[:, parents])
        if isinstance(state, KnownFunction):
            h[:, k] = _known_values(state, z)
            dval_dz = _known_grads(state, z)
        elif use_jit and state.chol is not None:
            q = np.ascontiguousarray(z / state.hyper.length_scales)
            h[:, k], dval_dz = _kernels.node_path_value_grad(
                q,
                state.train_scaled,
                state.alpha,
                state.chol.entries,
                state.hyper.output_scale,
                state.hyper.constant_mean,
                np.ascontiguousarray(1.0 / state.hyper.length_scales),
                np.ascontiguousarray(z_mat[:, k]),
                SIGMA_SNAP,
            )
        else:
            means, variances, dmean, dvar = posterior_batch_with_gradient(state, z)
            sigma = np.sqrt(np.maximum(variances, 0.0))
            live = sigma >= SIGMA_SNAP
            sigma = np.where(live, sigma, 0.0)
            dsigma = np.zeros_like(dvar)
            dsigma[live] = dvar[live] / (2.0 * sigma[live, None])
            h[:, k] = means + sigma * z_mat[:, k]
            dval_dz = dmean + z_mat[:, k][:, None] * dsigma
        grad_k = np.zeros((m, dim))
        for pos, d in enumerate(coords):
            grad_k[:, d] += dval_dz[:, pos]
        for pos, p in enumerate(parents):
            grad_k += dval_dz[:, len(coords) + pos][:, None] * jac[p]
        jac[k] = grad_k
    return h[:, -1], jac[-1]


def path_gradient(model: NetworkModel, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Gradient of the sample-path objective at x for one fixed normal vector z."""
    _, grads = path_value_and_gradient_batch(
        model, x, np.atleast_2d(np.asarray(z, dtype=float))
    )
    return grads[0]


def path_values_at_candidates(
    model: NetworkModel, candidates: np.ndarray, z_mat: np.ndarray, chunk: int = 16384
) -> np.ndarray:
    """Sample-path values for many candidate points at once, shape (C, M).

    Used to score raw acquisition candidates; memory-bounded by chunking the
    flattened (candidate, sample) row blocks.
    """
    c, dim = candidates.shape
    m = z_mat.shape[0]
    problem = model.problem
    rows_per_cand = m
    out = np.empty((c, m))
    step = max(1, chunk // rows_per_cand)
    for start in range(0, c, step):
        stop = min(c, start + step)
        nb = stop - start
        x_rows = np.repeat(candidates[start:stop], m, axis=0)  # (nb*M, D)
        z_tiled = np.tile(z_mat, (nb, 1))  # (nb*M, K)
        h = np.empty((nb * m, problem.node_count))
        for k in range(problem.node_count):
            parents = list(problem.topology.parents[k])
            state = model.node_posteriors[k]
            if not parents and not isinstance(state, KnownFunction):
                # Root surrogate: one GP row per candidate, not per sample.
                z1 = candidates[start:stop][:, list(problem.topology.input_coords[k])]
                means, variances = posterior_batch(state, z1)
                sigma = np.sqrt(variances)
                sigma[sigma < SIGMA_SNAP] = 0.0
                h[:, k] = (means[:, None] + sigma[:, None] * z_mat[None, :, k]).ravel()
                continue
            z = _assemble_inputs(problem, k, x_rows, h[:, parents])
            if isinstance(state, KnownFunction):
                h[:, k] = _known_values(state, z)
            else:
                h[:, k] = _node_path_values(state, z, z_tiled[:, k])
        out[start:stop] = h[:, -1].reshape(nb, m)
    return out

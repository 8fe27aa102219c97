"""Exact noiseless Gaussian-process regression for one network node.

Matern-5/2 kernel with one length scale per input (ARD), constant mean, and MAP
hyperparameter estimation. Fitting happens in a normalized space (inputs mapped
to [0,1] per coordinate, targets standardized) and the returned hyperparameters
are translated back to raw units, so NodePosterior is a plain raw-space GP.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from . import _kernels
from .errors import NotFactorizable
from .numerics import (
    BoxBounds,
    LowerTriangularFactor,
    bounded_minimize,
    cholesky_with_jitter,
    gamma_log_density,
)

SQRT5 = math.sqrt(5.0)

# Weakly informative MAP priors on normalized hyperparameters: length scales get
# Gamma(3, 6) (mode one third of the unit input range), the output scale of the
# standardized targets gets Gamma(2, 0.15); the constant mean is unpenalized.
LENGTH_PRIOR_SHAPE, LENGTH_PRIOR_RATE = 3.0, 6.0
SCALE_PRIOR_SHAPE, SCALE_PRIOR_RATE = 2.0, 0.15

_LOG_ELL_BOUNDS = (math.log(1e-2), math.log(1e2))
_LOG_SCALE_BOUNDS = (math.log(1e-4), math.log(1e4))
_MEAN_BOUNDS = (-10.0, 10.0)
_N_STARTS = 8


@dataclass(frozen=True)
class GPHyperparameters:
    """Constant mean, output scale (variance units), and per-input length scales."""

    constant_mean: float
    output_scale: float
    length_scales: np.ndarray

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.length_scales, dtype=float))
        object.__setattr__(self, "length_scales", ls)
        if not (self.output_scale > 0.0 and np.isfinite(self.output_scale)):
            raise ValueError("output_scale must be positive and finite")
        if not np.all((ls > 0.0) & np.isfinite(ls)):
            raise ValueError("length_scales must be positive and finite")


def _scaled_sqdist(a: np.ndarray, b: np.ndarray, ell: np.ndarray) -> np.ndarray:
    """Pairwise squared distances of a (p,d) and b (q,d) after dividing by ell."""
    sa = a / ell
    sb = b / ell
    r2 = (
        np.sum(sa * sa, axis=1)[:, None]
        + np.sum(sb * sb, axis=1)[None, :]
        - 2.0 * (sa @ sb.T)
    )
    return np.maximum(r2, 0.0)


def _matern52(r2: np.ndarray, output_scale: float) -> np.ndarray:
    r = np.sqrt(r2)
    return output_scale * (1.0 + SQRT5 * r + (5.0 / 3.0) * r2) * np.exp(-SQRT5 * r)


def matern52_ard(z1: np.ndarray, z2: np.ndarray, hyper: GPHyperparameters) -> float:
    """Kernel value output_scale * (1 + sqrt5 r + 5 r^2/3) exp(-sqrt5 r) with r the
    length-scale-weighted Euclidean distance between z1 and z2."""
    a = np.atleast_2d(np.asarray(z1, dtype=float))
    b = np.atleast_2d(np.asarray(z2, dtype=float))
    if a.shape[1] != hyper.length_scales.size or b.shape[1] != a.shape[1]:
        raise ValueError("input dimension does not match length_scales")
    return float(_matern52(_scaled_sqdist(a, b, hyper.length_scales), hyper.output_scale)[0, 0])


def kernel_matrix(inputs: np.ndarray, hyper: GPHyperparameters) -> np.ndarray:
    r2 = _scaled_sqdist(inputs, inputs, hyper.length_scales)
    np.fill_diagonal(r2, 0.0)
    return _matern52(r2, hyper.output_scale)


def cross_kernel(query: np.ndarray, train: np.ndarray, hyper: GPHyperparameters) -> np.ndarray:
    return _matern52(_scaled_sqdist(query, train, hyper.length_scales), hyper.output_scale)


@dataclass(frozen=True)
class NodePosterior:
    """Posterior GP state for one node: training pairs plus cached factorization.

    ``chol`` factors the prior kernel matrix on the training inputs (plus any
    numerical jitter) and ``alpha`` solves K alpha = targets - mean. An empty
    posterior (n=0) reproduces the prior. ``train_scaled`` caches the inputs
    divided by their length scales for the JIT fast path.
    """

    hyper: GPHyperparameters
    train_inputs: np.ndarray  # (n, d_in)
    train_targets: np.ndarray  # (n,)
    chol: Optional[LowerTriangularFactor]
    alpha: np.ndarray  # (n,)
    train_scaled: Optional[np.ndarray] = None

    @property
    def n_train(self) -> int:
        return self.train_inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.train_inputs.shape[1]


def build_node_posterior(
    hyper: GPHyperparameters, inputs: np.ndarray, targets: np.ndarray
) -> NodePosterior:
    """Condition a GP with the given hyperparameters on noiseless observations."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.asarray(targets, dtype=float).ravel()
    n = inputs.shape[0]
    if n == 0:
        return NodePosterior(
            hyper=hyper,
            train_inputs=inputs.reshape(0, hyper.length_scales.size),
            train_targets=targets,
            chol=None,
            alpha=np.zeros(0),
        )
    factor = cholesky_with_jitter(kernel_matrix(inputs, hyper))
    resid = targets - hyper.constant_mean
    tmp = solve_triangular(factor.entries, resid, lower=True)
    alpha = solve_triangular(factor.entries.T, tmp, lower=False)
    return NodePosterior(
        hyper=hyper,
        train_inputs=inputs,
        train_targets=targets,
        chol=factor,
        alpha=np.ascontiguousarray(alpha),
        train_scaled=np.ascontiguousarray(inputs / hyper.length_scales),
    )


def posterior(node: NodePosterior, z: np.ndarray) -> tuple:
    """Posterior (mean, variance) at one input; variance clamped at zero."""
    means, variances = posterior_batch(node, np.atleast_2d(np.asarray(z, dtype=float)))
    return float(means[0]), float(variances[0])


def posterior_batch(node: NodePosterior, queries: np.ndarray) -> tuple:
    """Posterior means and variances at a batch of query rows, shape (B, d_in)."""
    b = queries.shape[0]
    scale = node.hyper.output_scale
    if node.n_train == 0:
        return (
            np.full(b, node.hyper.constant_mean),
            np.full(b, scale),
        )
    if _kernels.HAVE_NUMBA and node.chol is not None:
        q = np.ascontiguousarray(queries / node.hyper.length_scales)
        return _kernels.node_mean_var(
            q,
            node.train_scaled,
            node.alpha,
            node.chol.entries,
            scale,
            node.hyper.constant_mean,
        )
    kx = cross_kernel(queries, node.train_inputs, node.hyper)
    means = node.hyper.constant_mean + kx @ node.alpha
    v = solve_triangular(node.chol.entries, kx.T, lower=True)
    variances = np.maximum(scale - np.einsum("ij,ij->j", v, v), 0.0)
    return means, variances


def posterior_batch_with_gradient(node: NodePosterior, queries: np.ndarray) -> tuple:
    """Means, variances, and their query gradients for a batch of rows.

    Returns (means (B,), variances (B,), dmean (B,d), dvar (B,d)); derivatives of
    the Matern-5/2 cross-covariance are analytic and finite at zero distance.
    """
    b, d = queries.shape
    scale = node.hyper.output_scale
    if node.n_train == 0:
        return (
            np.full(b, node.hyper.constant_mean),
            np.full(b, scale),
            np.zeros((b, d)),
            np.zeros((b, d)),
        )
    if _kernels.HAVE_NUMBA and node.chol is not None:
        q = np.ascontiguousarray(queries / node.hyper.length_scales)
        return _kernels.node_mean_var_grad(
            q,
            node.train_scaled,
            node.alpha,
            node.chol.entries,
            scale,
            node.hyper.constant_mean,
            np.ascontiguousarray(1.0 / node.hyper.length_scales),
        )
    ell = node.hyper.length_scales
    diff = (queries[:, None, :] - node.train_inputs[None, :, :]) / ell  # (B,n,d)
    r2 = np.einsum("bnd,bnd->bn", diff, diff)
    r = np.sqrt(r2)
    e = np.exp(-SQRT5 * r)
    kx = scale * (1.0 + SQRT5 * r + (5.0 / 3.0) * r2) * e  # (B,n)
    # d k / d (scaled sq dist); smooth through r = 0.
    dk_dr2 = -(5.0 / 6.0) * scale * (1.0 + SQRT5 * r) * e
    means = node.hyper.constant_mean + kx @ node.alpha
    ell_factor = diff / ell  # (B,n,d): d r2 / d z = 2 * diff / ell
    dmean = 2.0 * np.einsum("bn,bnd->bd", dk_dr2 * node.alpha[None, :], ell_factor)
    lmat = node.chol.entries
    v = solve_triangular(lmat, kx.T, lower=True)  # (n,B)
    variances = np.maximum(scale - np.einsum("ij,ij->j", v, v), 0.0)
    w = solve_triangular(lmat.T, v, lower=False).T  # (B,n): K^{-1} k
    dvar = -4.0 * np.einsum("bn,bnd->bd", dk_dr2 * w, ell_factor)
    return means, variances, dmean, dvar


# ---------------------------------------------------------------------------
# MAP fitting
# ---------------------------------------------------------------------------


def _column_ranges(inputs: np.ndarray, ranges) -> tuple:
    d = inputs.shape[1]
    lo = np.empty(d)
    hi = np.empty(d)
    for j in range(d):
        if ranges is not None and ranges[j] is not None:
            lo[j], hi[j] = ranges[j]
        else:
            lo[j], hi[j] = np.min(inputs[:, j]), np.max(inputs[:, j])
        if not hi[j] - lo[j] > 1e-12:
            lo[j], hi[j] = lo[j] - 0.5, lo[j] + 0.5
    return lo, hi


def _neg_lml_numpy(zn, ys, mean, scale, ell):
    """Negative log marginal likelihood and gradient in (mean, log scale,
    log length_scales); reference implementation for the JIT kernel."""
    n, d = zn.shape
    corr_r2 = _scaled_sqdist(zn, zn, ell)
    np.fill_diagonal(corr_r2, 0.0)
    kmat = _matern52(corr_r2, scale)
    try:
        factor = cholesky_with_jitter(kmat)
    except NotFactorizable:
        return 1e25, np.zeros(2 + d)
    lmat = factor.entries
    resid = ys - mean
    alpha = solve_triangular(
        lmat.T, solve_triangular(lmat, resid, lower=True), lower=False
    )
    log_det = 2.0 * float(np.sum(np.log(np.diag(lmat))))
    lml = -0.5 * float(resid @ alpha) - 0.5 * log_det - 0.5 * n * math.log(2.0 * math.pi)

    kinv = solve_triangular(
        lmat.T, solve_triangular(lmat, np.eye(n), lower=True), lower=False
    )
    outer_minus_inv = np.outer(alpha, alpha) - kinv

    grad = np.zeros(2 + d)
    grad[0] = float(np.sum(alpha))
    grad[1] = 0.5 * float(np.sum(outer_minus_inv * kmat))
    r = np.sqrt(corr_r2)
    dk_base = (5.0 / 3.0) * scale * (1.0 + SQRT5 * r) * np.exp(-SQRT5 * r)
    for j in range(d):
        dz = (zn[:, None, j] - zn[None, :, j]) / ell[j]
        grad[2 + j] = 0.5 * float(np.sum(outer_minus_inv * (dk_base * dz * dz)))
    return -lml, -grad


def _neg_log_posterior(theta, zn, ys):
    """Negative (marginal likelihood + hyperprior) and its gradient, in the
    parameterization (mean, log output_scale, log length_scales)."""
    d = zn.shape[1]
    mean = theta[0]
    scale = math.exp(theta[1])
    ell = np.exp(theta[2:])
    if _kernels.HAVE_NUMBA:
        value, grad = _kernels.nlml_value_grad(zn, ys, mean, scale, ell)
    else:
        value, grad = _neg_lml_numpy(zn, ys, mean, scale, ell)
    if value >= 1e25:
        return value, grad

    log_prior = gamma_log_density(scale, SCALE_PRIOR_SHAPE, SCALE_PRIOR_RATE)
    grad = grad.copy()
    grad[1] -= (SCALE_PRIOR_SHAPE - 1.0) - SCALE_PRIOR_RATE * scale
    for j in range(d):
        log_prior += gamma_log_density(ell[j], LENGTH_PRIOR_SHAPE, LENGTH_PRIOR_RATE)
        grad[2 + j] -= (LENGTH_PRIOR_SHAPE - 1.0) - LENGTH_PRIOR_RATE * ell[j]
    return value - log_prior, grad


def _fallback_hyper(targets, spans) -> GPHyperparameters:
    return GPHyperparameters(
        constant_mean=float(np.mean(targets)) if targets.size else 0.0,
        output_scale=1e-6,
        length_scales=spans.copy(),
    )


def fit_map(
    inputs: np.ndarray,
    targets: np.ndarray,
    ranges: Optional[Sequence] = None,
    seed: int = 0,
) -> GPHyperparameters:
    """MAP hyperparameters for noiseless observations.

    ``ranges`` optionally fixes the (lo, hi) normalization interval per input
    column (decision coordinates use the problem bounds; parent-output columns
    default to the observed min/max). Optimization runs in log-parameter space
    with 8 starts (the prior mode plus 7 seeded log-uniform draws). Degenerate
    data (all targets equal, or a single point) falls back to a near-zero
    output scale and unit normalized length scales.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.asarray(targets, dtype=float).ravel()
    n, d = inputs.shape
    if n != targets.size:
        raise ValueError("inputs and targets disagree on n")
    lo, hi = _column_ranges(inputs, ranges)
    spans = hi - lo
    y_mean = float(np.mean(targets)) if n else 0.0
    y_std = float(np.std(targets)) if n else 0.0
    if n < 2 or y_std <= 1e-12 * max(1.0, abs(y_mean)):
        return _fallback_hyper(targets, spans)

    zn = (inputs - lo) / spans
    ys = (targets - y_mean) / y_std

    ell_mode = (LENGTH_PRIOR_SHAPE - 1.0) / LENGTH_PRIOR_RATE
    scale_mode = (SCALE_PRIOR_SHAPE - 1.0) / SCALE_PRIOR_RATE
    starts = [np.concatenate(([0.0, math.log(scale_mode)], np.full(d, math.log(ell_mode))))]
    rng = np.random.default_rng(seed)
    for _ in range(_N_STARTS - 1):
        mean0 = rng.uniform(-1.0, 1.0)
        scale0 = math.exp(rng.uniform(math.log(0.1), math.log(10.0)))
        ell0 = np.exp(rng.uniform(math.log(0.05), math.log(3.0), size=d))
        starts.append(np.concatenate(([mean0, math.log(scale0)], np.log(ell0))))

    theta_bounds = BoxBounds(
        lower=np.concatenate(
            ([_MEAN_BOUNDS[0], _LOG_SCALE_BOUNDS[0]], np.full(d, _LOG_ELL_BOUNDS[0]))
        ),
        upper=np.concatenate(
            ([_MEAN_BOUNDS[1], _LOG_SCALE_BOUNDS[1]], np.full(d, _LOG_ELL_BOUNDS[1]))
        ),
    )

    # Two-stage multi-start: explore every start briefly, then polish the two
    # most promising; saves most of the fit cost without changing the winner.
    objective = lambda t: _neg_log_posterior(t, zn, ys)
    stage1 = [
        bounded_minimize(objective, theta0, theta_bounds, max_iters=15)
        for theta0 in starts
    ]
    stage1.sort(key=lambda pair: pair[1])
    best_theta, best_val = None, np.inf
    for theta0, _ in stage1[:2]:
        theta, val = bounded_minimize(objective, theta0, theta_bounds, max_iters=85)
        if val < best_val:
            best_theta, best_val = theta, val

    mean_s = best_theta[0]
    scale_s = math.exp(best_theta[1])
    ell_n = np.exp(best_theta[2:])
    return GPHyperparameters(
        constant_mean=mean_s * y_std + y_mean,
        output_scale=scale_s * y_std * y_std,
        length_scales=ell_n * spans,
    )


def log_marginal_likelihood(
    hyper: GPHyperparameters, inputs: np.ndarray, targets: np.ndarray
) -> float:
    """Raw-space log marginal likelihood (no priors); used by diagnostics/tests."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.asarray(targets, dtype=float).ravel()
    n = inputs.shape[0]
    factor = cholesky_with_jitter(kernel_matrix(inputs, hyper))
    resid = targets - hyper.constant_mean
    tmp = solve_triangular(factor.entries, resid, lower=True)
    return float(
        -0.5 * tmp @ tmp
        - np.sum(np.log(np.diag(factor.entries)))
        - 0.5 * n * math.log(2.0 * math.pi)
    )

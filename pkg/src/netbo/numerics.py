"""Self-contained numerical kernels: Cholesky with jitter escalation, quasi-Monte
Carlo normal samples, a bounded smooth minimizer with optional simplex projection,
and small distribution utilities. Everything here is pure and thread-safe."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize as sp_optimize
from scipy.special import ndtr, ndtri
from scipy.stats import qmc

from .errors import DimensionError, DomainError, NonFiniteObjective, NotFactorizable

# Escalation ladder for numerical regularization, relative to mean(diag).
JITTER_LEVELS = (0.0, 1e-8, 1e-6, 1e-4)

# Largest dimension supported by the Sobol direction numbers shipped with scipy.
MAX_SOBOL_DIM = 21201


@dataclass(frozen=True)
class LowerTriangularFactor:
    """Lower-triangular Cholesky factor of a (possibly jittered) SPD matrix."""

    n: int
    entries: np.ndarray  # dense lower triangular, shape (n, n)
    jitter_used: float

    def __post_init__(self):
        if self.n < 1 or self.entries.shape != (self.n, self.n):
            raise ValueError("factor shape inconsistent with declared dimension")
        if np.any(np.diag(self.entries) <= 0.0):
            raise ValueError("factor diagonal must be strictly positive")


@dataclass(frozen=True)
class BoxBounds:
    """Hyper-rectangle lower/upper bounds for a decision vector."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("lower and upper must be 1-D arrays of equal length")
        if not np.all(lower < upper):
            raise ValueError("need lower[d] < upper[d] for all coordinates")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(
            np.all(x >= self.lower - tol * (1.0 + np.abs(self.lower)))
            and np.all(x <= self.upper + tol * (1.0 + np.abs(self.upper)))
        )

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n uniform points in the box, shape (n, dim)."""
        u = rng.random((n, self.dim))
        return self.lower + u * self.span


@dataclass(frozen=True)
class SimplexConstraint:
    """Budget constraint sum(x) <= cap on top of nonnegativity from the box."""

    cap: float

    def __post_init__(self):
        if not (self.cap > 0.0 and math.isfinite(self.cap)):
            raise ValueError("cap must be a positive finite real")

    def satisfied(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        return bool(np.sum(x) <= self.cap + tol)


def cholesky_with_jitter(a: np.ndarray) -> LowerTriangularFactor:
    """Factor a symmetric matrix, escalating diagonal jitter until it succeeds.

    Jitter levels are ``{0, 1e-8, 1e-6, 1e-4} * mean(diag(a))``. Raises
    NotFactorizable when even the largest level fails, which signals a severely
    ill-conditioned kernel matrix.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError("expected a square matrix of dimension >= 1")
    n = a.shape[0]
    base = float(np.mean(np.diag(a)))
    eye = np.eye(n)
    for level in JITTER_LEVELS:
        jitter = level * base
        try:
            ell = np.linalg.cholesky(a + jitter * eye)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(ell)) and np.all(np.diag(ell) > 0.0):
            return LowerTriangularFactor(n=n, entries=ell, jitter_used=jitter)
    raise NotFactorizable(
        f"Cholesky failed for all jitter levels (n={n}, mean diag={base:.3e})"
    )


def inverse_normal_cdf(u):
    """Standard-normal quantile; accepts scalars or arrays in (0, 1)."""
    arr = np.asarray(u, dtype=float)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError("inverse_normal_cdf requires 0 < u < 1")
    out = ndtri(arr)
    return float(out) if np.isscalar(u) or arr.ndim == 0 else out


def normal_cdf(z):
    return ndtr(z)


def normal_pdf(z):
    return np.exp(-0.5 * np.square(z)) / math.sqrt(2.0 * math.pi)


def gamma_log_density(x: float, shape: float, rate: float) -> float:
    """Log density of Gamma(shape, rate) at x > 0."""
    if x <= 0.0:
        raise DomainError("gamma_log_density requires x > 0")
    if shape <= 0.0 or rate <= 0.0:
        raise DomainError("shape and rate must be positive")
    return (
        shape * math.log(rate)
        - math.lgamma(shape)
        + (shape - 1.0) * math.log(x)
        - rate * x
    )


@dataclass(frozen=True)
class BaseSampleMatrix:
    """Fixed matrix of standard-normal QMC draws underpinning a deterministic SAA.

    Row m is the m-th base sample Z^(m); column k feeds node k of the network.
    Immutable after creation and safe to share across threads.
    """

    values: np.ndarray  # shape (m_samples, dim)
    seed: int

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def m_samples(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def sobol_normal_matrix(m: int, k: int, seed: int) -> BaseSampleMatrix:
    """First m points of a seeded scrambled Sobol sequence in [0,1)^k mapped
    through the inverse normal CDF. Deterministic given (m, k, seed)."""
    if m < 1 or k < 1:
        raise ValueError("m and k must be positive")
    if k > MAX_SOBOL_DIM:
        raise DimensionError(f"Sobol direction numbers support at most {MAX_SOBOL_DIM} dims")
    engine = qmc.Sobol(d=k, scramble=True, seed=seed)
    # Draw a power-of-two count (same leading points) to keep the generator quiet.
    n_draw = 1 << max(0, int(math.ceil(math.log2(m))))
    u = engine.random(n_draw)[:m]
    u = np.clip(u, 2.0**-64, 1.0 - 2.0**-53)
    return BaseSampleMatrix(values=ndtri(u), seed=seed)


def project_box_simplex(
    x: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    cap: float,
) -> np.ndarray:
    """Euclidean projection onto {lower <= y <= upper, sum(y) <= cap}.

    Uses the KKT form y(tau) = clip(x - tau, lower, upper) with tau >= 0 chosen
    by bisection so that sum(y) == cap when the clipped point violates the cap.
    """
    y = np.clip(x, lower, upper)
    if y.sum() <= cap:
        return y
    if np.sum(lower) > cap:
        raise ValueError("infeasible: sum(lower) exceeds the simplex cap")
    lo, hi = 0.0, float(np.max(x - lower))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.clip(x - mid, lower, upper).sum() > cap:
            lo = mid
        else:
            hi = mid
    return np.clip(x - hi, lower, upper)


def _project(x, bounds: BoxBounds, constraint: Optional[SimplexConstraint]):
    if constraint is None:
        return bounds.clip(x)
    return project_box_simplex(x, bounds.lower, bounds.upper, constraint.cap)


def _checked_call(objective, x):
    value, grad = objective(x)
    grad = np.asarray(grad, dtype=float)
    if not (np.isfinite(value) and np.all(np.isfinite(grad))):
        raise NonFiniteObjective(f"objective returned non-finite output at x={x!r}")
    return float(value), grad


def bounded_minimize(
    objective: Callable[[np.ndarray], tuple],
    start: np.ndarray,
    bounds: BoxBounds,
    constraint: Optional[SimplexConstraint] = None,
    max_iters: int = 200,
) -> tuple:
    """Minimize a smooth objective (value, gradient) over a box, optionally
    intersected with a simplex budget.

    Box-only problems go through L-BFGS-B. With a simplex constraint the solver
    switches to projected gradient descent with Barzilai-Borwein steps and an
    Armijo backtracking line search, Euclidean-projecting every iterate onto the
    feasible set. Stops on projected-gradient inf-norm <= 1e-8, relative
    objective change <= 1e-12, or max_iters.

    Returns (argmin, value); the result never exceeds the start value.
    """
    x0 = _project(np.asarray(start, dtype=float), bounds, constraint)
    if constraint is None:
        return _lbfgsb_minimize(objective, x0, bounds, max_iters)
    return _projected_bb_minimize(objective, x0, bounds, constraint, max_iters)


def _lbfgsb_minimize(objective, x0, bounds: BoxBounds, max_iters: int):
    f0, _ = _checked_call(objective, x0)
    res = sp_optimize.minimize(
        lambda x: _checked_call(objective, x),
        x0,
        jac=True,
        method="L-BFGS-B",
        bounds=list(zip(bounds.lower, bounds.upper)),
        options={"maxiter": max_iters, "ftol": 1e-12, "gtol": 1e-8},
    )
    x_best = bounds.clip(res.x)
    f_best = float(res.fun)
    if not math.isfinite(f_best) or f_best > f0:
        return x0, f0
    return x_best, f_best


def _projected_bb_minimize(objective, x0, bounds, constraint, max_iters):
    x = x0
    f, g = _checked_call(objective, x)
    step = 1.0 / max(1.0, float(np.linalg.norm(g)))
    for _ in range(max_iters):
        if np.max(np.abs(x - _project(x - g, bounds, constraint))) <= 1e-8:
            break
        cand, fc, gc = None, None, None
        t = step
        for _ in range(60):
            trial = _project(x - t * g, bounds, constraint)
            direction = trial - x
            if np.max(np.abs(direction)) == 0.0:
                break
            ft, gt = _checked_call(objective, trial)
            if ft <= f + 1e-4 * float(g @ direction):
                cand, fc, gc = trial, ft, gt
                break
            t *= 0.5
        if cand is None:
            break
        s = cand - x
        yv = gc - g
        sy = float(s @ yv)
        step = float(s @ s) / sy if sy > 1e-16 else min(1.0, step * 2.0)
        step = min(max(step, 1e-12), 1e12)
        converged = abs(f - fc) <= 1e-12 * max(1.0, abs(fc))
        x, f, g = cand, fc, gc
        if converged:
            break
    return x, f

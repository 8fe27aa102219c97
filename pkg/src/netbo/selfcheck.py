"""Fast invariant and oracle battery behind the ``check`` CLI command.

Each check returns within a couple of seconds; together they cover the numeric
kernels, the shipped benchmark identities, and end-to-end determinism.
"""

from __future__ import annotations

import math
from typing import Callable, List, Tuple

import numpy as np

from .acquisition import Method, SAAConfig, ei_closed_form
from .gp import GPHyperparameters, build_node_posterior, posterior
from .harness import ExperimentConfig, run_replication
from .network import evaluate_network, get_problem
from .numerics import (
    BoxBounds,
    SimplexConstraint,
    bounded_minimize,
    cholesky_with_jitter,
    inverse_normal_cdf,
    project_box_simplex,
    sobol_normal_matrix,
)


def _check_cholesky() -> None:
    f = cholesky_with_jitter(np.eye(2))
    assert f.jitter_used == 0.0 and np.allclose(f.entries, np.eye(2))
    f = cholesky_with_jitter(np.array([[4.0, 2.0], [2.0, 5.0]]))
    assert np.allclose(f.entries, [[2.0, 0.0], [1.0, 2.0]])
    f = cholesky_with_jitter(np.ones((2, 2)))
    assert f.jitter_used > 0.0
    recon = f.entries @ f.entries.T
    assert np.max(np.abs(recon - np.ones((2, 2)))) <= 1e-4


def _check_inverse_normal() -> None:
    assert inverse_normal_cdf(0.5) == 0.0
    assert abs(inverse_normal_cdf(0.975) - 1.959963985) < 1e-6
    grid = np.linspace(1e-6, 1 - 1e-6, 1001)
    z = inverse_normal_cdf(grid)
    assert np.all(np.diff(z) > 0)


def _check_sobol() -> None:
    a = sobol_normal_matrix(256, 3, seed=42).values
    b = sobol_normal_matrix(256, 3, seed=42).values
    assert np.array_equal(a, b)
    c = sobol_normal_matrix(256, 3, seed=43).values
    assert not np.array_equal(a, c)
    big = sobol_normal_matrix(4096, 4, seed=1).values
    assert np.all(np.abs(big.mean(axis=0)) <= 0.05)


def _check_minimizer() -> None:
    bounds = BoxBounds(lower=np.zeros(1), upper=np.ones(1))
    x, _ = bounded_minimize(
        lambda v: ((v[0] - 0.3) ** 2, np.array([2.0 * (v[0] - 0.3)])),
        np.array([0.9]),
        bounds,
    )
    assert abs(x[0] - 0.3) <= 1e-6
    y = project_box_simplex(np.array([0.9, 0.9, 0.9]), np.zeros(3), np.ones(3), 1.0)
    assert y.sum() <= 1.0 + 1e-10 and np.all(y >= -1e-12)


def _check_gp_interpolation() -> None:
    rng = np.random.default_rng(5)
    x = rng.uniform(0, 1, (8, 1))
    y = np.sin(4 * x[:, 0])
    hyper = GPHyperparameters(constant_mean=0.0, output_scale=1.0, length_scales=np.array([0.3]))
    node = build_node_posterior(hyper, x, y)
    for i in range(8):
        mean, var = posterior(node, x[i])
        assert abs(mean - y[i]) <= 1e-6
        assert var <= 1e-6


def _check_ei_closed_form() -> None:
    assert abs(ei_closed_form(0.0, 1.0, 0.0) - 0.3989422804) < 1e-9
    assert ei_closed_form(-1.0, 0.0, 0.0) == 0.0
    assert ei_closed_form(2.0, 0.0, 1.0) == 1.0


def _check_benchmark_identities() -> None:
    dropwave = get_problem("dropwave")
    h = evaluate_network(dropwave, np.zeros(2))
    assert abs(h[0]) < 1e-15 and abs(h[1] - 1.0) < 1e-15
    ackley = get_problem("ackley6")
    h = evaluate_network(ackley, np.zeros(6))
    assert abs(h[2]) < 1e-12
    rosen = get_problem("rosenbrock4")
    assert np.max(np.abs(evaluate_network(rosen, np.ones(5)))) < 1e-15
    alpine = get_problem("alpine2_6")
    x = np.array([1.0, 2.0, 0.0, 4.0, 5.0, 6.0])
    assert evaluate_network(alpine, x)[-1] == 0.0
    from .benchmarks import BETA_STAR

    sis = get_problem("sis_calibration")
    assert abs(evaluate_network(sis, BETA_STAR)[-1]) < 1e-15


def _check_determinism() -> None:
    cfg = ExperimentConfig(
        problem_id="dropwave",
        method=Method.RANDOM,
        budget=3,
        replications=1,
        base_seed=7,
        saa=SAAConfig(mc_samples=16, restarts=2, raw_candidates=8),
    )
    t1 = run_replication(cfg, 0)
    t2 = run_replication(cfg, 0)
    assert np.array_equal(t1.points, t2.points)
    assert np.array_equal(t1.best, t2.best)


CHECKS: List[Tuple[str, Callable[[], None]]] = [
    ("cholesky factorization and jitter ladder", _check_cholesky),
    ("inverse normal CDF", _check_inverse_normal),
    ("scrambled Sobol normal draws", _check_sobol),
    ("bounded minimizer and simplex projection", _check_minimizer),
    ("GP noiseless interpolation", _check_gp_interpolation),
    ("closed-form expected improvement", _check_ei_closed_form),
    ("benchmark network identities", _check_benchmark_identities),
    ("replication determinism", _check_determinism),
]


def run_all(verbose_print: Callable[[str], None] = print) -> bool:
    """Run every check, print one PASS/FAIL line each, return overall success."""
    ok = True
    for name, fn in CHECKS:
        try:
            fn()
        except Exception as exc:  # noqa: BLE001 - report, don't crash the battery
            ok = False
            verbose_print(f"FAIL  {name}: {exc!r}")
        else:
            verbose_print(f"PASS  {name}")
    return ok

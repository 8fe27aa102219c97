"""Asymptomatic-screening control problem: choose square-array pool sizes for
three testing periods to trade off reagent use, isolations, and new infections.

Pooled testing on an x-by-x array tests the 2x row/column pools first and then
individually confirms cells whose row and column both flagged. Its operating
characteristics (overall true/false positive rates and chemical reactions per
person) are estimated by seeded Monte Carlo, with the seed fixed per (pool size,
period) so the whole objective is a deterministic black box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..network import KnownFunction, NetworkProblem, NetworkTopology
from ..numerics import BoxBounds

_CHARACTERISTIC_SEED_TAG = 20210521
MC_ARRAYS = 2000


@dataclass(frozen=True)
class TestErrorModel:
    """Per-reaction error rates of the underlying chemical test."""

    __test__ = False  # keep pytest from collecting this as a test class

    false_positive_rate: float = 0.001
    individual_sensitivity: float = 0.95
    pool_sensitivity_base: float = 0.95
    pool_sensitivity_slope: float = 0.01
    pool_sensitivity_floor: float = 0.6

    def pool_sensitivity(self, pool_size: int) -> float:
        decayed = self.pool_sensitivity_base - self.pool_sensitivity_slope * (pool_size - 1)
        return max(self.pool_sensitivity_floor, decayed)


@dataclass(frozen=True)
class CovidParams:
    """Dynamics and cost constants for the three-period screening problem."""

    beta: float = (14.0 / 3.0) * math.log(2.0)  # doubling every 3 days untreated
    horizon: int = 3
    cost_test: float = 1.0
    cost_isolation: float = 10.0
    cost_infection: float = 300.0
    initial_infected: float = 0.01
    initial_recovered: float = 0.0
    test_model: TestErrorModel = TestErrorModel()


def pooled_test_characteristics(
    pool_size: int,
    prevalence: float,
    test_model: TestErrorModel,
    rng: np.random.Generator,
    n_arrays: int = MC_ARRAYS,
) -> tuple:
    """(true positive rate, false positive rate, reactions per person) of the
    square-array procedure at the given prevalence.

    Estimated over ``n_arrays`` independent arrays with iid infection status;
    pool size 1 short-circuits to individual testing. When a status class never
    occurs in the simulation, its rate falls back to the analytic rare-class
    limit (both pools containing only the focal sample flag at pool sensitivity,
    then the confirmation reacts on the sample itself).
    """
    if pool_size < 1:
        raise ValueError("pool size must be >= 1")
    tm = test_model
    if pool_size == 1:
        return tm.individual_sensitivity, tm.false_positive_rate, 1.0
    sens = tm.pool_sensitivity(pool_size)
    fp = tm.false_positive_rate
    infected = rng.random((n_arrays, pool_size, pool_size)) < prevalence
    row_hit = infected.any(axis=2)
    col_hit = infected.any(axis=1)
    row_pos = rng.random(row_hit.shape) < np.where(row_hit, sens, fp)
    col_pos = rng.random(col_hit.shape) < np.where(col_hit, sens, fp)
    confirm = row_pos[:, :, None] & col_pos[:, None, :]
    final_pos = confirm & (
        rng.random(infected.shape) < np.where(infected, tm.individual_sensitivity, fp)
    )
    n_cells = infected.size
    n_infected = int(infected.sum())
    n_clean = n_cells - n_infected
    if n_infected:
        alpha_tp = float((final_pos & infected).sum()) / n_infected
    else:
        alpha_tp = sens * sens * tm.individual_sensitivity
    if n_clean:
        alpha_fp = float((final_pos & ~infected).sum()) / n_clean
    else:
        alpha_fp = sens * sens * fp
    reactions = 2.0 * pool_size * n_arrays + float(confirm.sum())
    alpha_c = reactions / n_cells
    return alpha_tp, alpha_fp, alpha_c


def _round_pool(x: float) -> int:
    return max(1, int(math.floor(x + 0.5)))


@lru_cache(maxsize=8192)
def _cached_characteristics(pool_size: int, prevalence: float, period: int, params: CovidParams):
    rng = np.random.default_rng(
        np.random.SeedSequence([_CHARACTERISTIC_SEED_TAG, period, pool_size])
    )
    return pooled_test_characteristics(pool_size, prevalence, params.test_model, rng)


def _period_outputs(x_t: float, infected: float, recovered: float, period: int, params: CovidParams):
    """Loss, next infected fraction, and next recovered fraction for one period."""
    pool = _round_pool(x_t)
    susceptible = max(0.0, 1.0 - infected - recovered)
    alpha_tp, alpha_fp, alpha_c = _cached_characteristics(pool, infected, period, params)
    isolated = alpha_tp * infected + alpha_fp * (susceptible + recovered)
    # New infections are drawn from the susceptible pool and cannot exceed it.
    next_infected = min(infected * (1.0 - alpha_tp) * math.exp(params.beta * susceptible),
                        susceptible)
    next_recovered = recovered + infected
    loss = (
        params.cost_test * alpha_c
        + params.cost_isolation * isolated
        + params.cost_infection * next_infected
    )
    return loss, next_infected, next_recovered


def covid_network(params: CovidParams = None) -> NetworkProblem:
    """Screening-control network on pool sizes in [1, 20]^3 (rounded inside the
    evaluator).

    Each period contributes surrogate nodes for its loss and for the next
    infected/recovered fractions; later periods read the previous state nodes,
    and a known leaf emits the negated total loss. The final period only needs
    its loss node, since nothing downstream consumes the terminal state.
    """
    if params is None:
        params = CovidParams()
    horizon = params.horizon
    i1, r1 = params.initial_infected, params.initial_recovered

    def make_fn(period, component):
        def fn(z):
            if period == 0:
                infected, recovered = i1, r1
            else:
                infected, recovered = float(z[1]), float(z[2])
            return float(_period_outputs(float(z[0]), infected, recovered, period, params)[component])

        return fn

    parents, coords, fns, kinds = [], [], [], []
    loss_nodes = []
    prev_state = None
    for t in range(horizon):
        period_parents = () if t == 0 else prev_state
        loss_nodes.append(len(fns))
        fns.append(make_fn(t, 0))
        parents.append(period_parents)
        coords.append((t,))
        kinds.append(None)
        if t < horizon - 1:
            state_base = len(fns)
            for component in (1, 2):
                fns.append(make_fn(t, component))
                parents.append(period_parents)
                coords.append((t,))
                kinds.append(None)
            prev_state = (state_base, state_base + 1)

    loss_idx = tuple(loss_nodes)

    def total_fn(z):
        return -float(np.sum(z))

    def total_grad(z):
        return -np.ones_like(z)

    leaf = KnownFunction(
        fn=total_fn,
        grad=total_grad,
        batch_fn=lambda z: -np.sum(z, axis=1),
        batch_grad=lambda z: -np.ones_like(z),
    )
    fns.append(leaf.fn)
    parents.append(loss_idx)
    coords.append(())
    kinds.append(leaf)

    topology = NetworkTopology(
        node_count=len(fns),
        parents=parents,
        input_coords=coords,
        decision_dim=horizon,
    )
    return NetworkProblem(
        name="covid_testing",
        topology=topology,
        node_functions=fns,
        node_kinds=kinds,
        bounds=BoxBounds(lower=np.ones(horizon), upper=np.full(horizon, 20.0)),
        reference_optimum=None,
    )

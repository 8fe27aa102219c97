"""Two-population susceptible-infectious-susceptible dynamics and the
transmission-rate calibration problem built on them.

The decision vector stacks the twelve contact rates beta[i, j, t] (two groups,
three periods) as beta[4*t + 2*i + j]. A held-out rate vector generates the
observed trajectory; the objective is the negated squared error between the
simulated and observed infection fractions, so calibration is maximization with
known optimum zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..network import KnownFunction, NetworkProblem, NetworkTopology
from ..numerics import BoxBounds

# Held-out transmission rates: one draw, uniform over [0.05, 0.8]^12 from seed 0,
# frozen so every run calibrates the same instance.
BETA_STAR = np.array(
    [
        0.5277212654910908,
        0.2523400353229027,
        0.08073014295214602,
        0.062395726646396824,
        0.6599526794002044,
        0.7345666829582913,
        0.5049768318253849,
        0.5971224207379988,
        0.4577187435990671,
        0.7513043178408262,
        0.6618901655911491,
        0.052053875127611074,
    ]
)


@dataclass(frozen=True)
class SISParams:
    """Fixed instance data for the calibration problem."""

    gamma: float = 0.5
    initial_infected: float = 0.01
    horizon: int = 3
    beta_star: np.ndarray = field(default_factory=lambda: BETA_STAR.copy())
    observed: np.ndarray = None  # (2, horizon), filled from beta_star when omitted

    def __post_init__(self):
        if self.observed is None:
            object.__setattr__(self, "observed", sis_trajectory(self.beta_star, self))


def _step(infected: np.ndarray, beta_block: np.ndarray, gamma: float) -> np.ndarray:
    new = infected * (1.0 - gamma) + (1.0 - infected) * (beta_block @ infected)
    return np.clip(new, 0.0, 1.0)


def sis_trajectory(beta: np.ndarray, params: SISParams = None) -> np.ndarray:
    """Infection fractions I[i, t] for t = 1..horizon from the two-group recursion
    starting at the fixed initial prevalence; values clamped to [0, 1]."""
    if params is None:
        params = SISParams()
    beta = np.asarray(beta, dtype=float)
    infected = np.full(2, params.initial_infected)
    out = np.empty((2, params.horizon))
    for t in range(params.horizon):
        block = beta[4 * t : 4 * t + 4].reshape(2, 2)
        infected = _step(infected, block, params.gamma)
        out[:, t] = infected
    return out


def sis_calibration_network(params: SISParams = None) -> NetworkProblem:
    """Seven nodes: one surrogate per (group, period) infection fraction, wired so
    period-t nodes read that period's four rates plus both period-(t-1) outputs,
    and a known leaf emitting the negated sum of squared errors over all
    groups and periods."""
    if params is None:
        params = SISParams()
    gamma = params.gamma
    i0 = params.initial_infected
    horizon = params.horizon
    dim = 4 * horizon

    def period_fn(group):
        def fn(z):
            infected = np.array([i0, i0]) if z.size == 4 else z[4:6]
            block = z[:4].reshape(2, 2)
            return float(_step(infected, block, gamma)[group])

        return fn

    # observations flattened in node order: (group 1, group 2) per period
    obs_flat = params.observed.T.ravel()

    def mse_fn(z):
        return -float(np.sum((obs_flat - z) ** 2))

    def mse_grad(z):
        return 2.0 * (obs_flat - z)

    def mse_batch_fn(z):
        return -np.sum((obs_flat[None, :] - z) ** 2, axis=1)

    def mse_batch_grad(z):
        return 2.0 * (obs_flat[None, :] - z)

    parents, coords, fns = [], [], []
    for t in range(horizon):
        beta_block = tuple(range(4 * t, 4 * t + 4))
        period_parents = () if t == 0 else (2 * (t - 1), 2 * (t - 1) + 1)
        for group in range(2):
            parents.append(period_parents)
            coords.append(beta_block)
            fns.append(period_fn(group))
    parents.append(tuple(range(2 * horizon)))
    coords.append(())
    leaf = KnownFunction(
        fn=mse_fn, grad=mse_grad, batch_fn=mse_batch_fn, batch_grad=mse_batch_grad
    )
    fns.append(leaf.fn)

    topology = NetworkTopology(
        node_count=2 * horizon + 1,
        parents=parents,
        input_coords=coords,
        decision_dim=dim,
    )
    return NetworkProblem(
        name="sis_calibration",
        topology=topology,
        node_functions=fns,
        node_kinds=[None] * (2 * horizon) + [leaf],
        bounds=BoxBounds(lower=np.zeros(dim), upper=np.ones(dim)),
        reference_optimum=0.0,
    )

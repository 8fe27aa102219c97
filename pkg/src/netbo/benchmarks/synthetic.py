"""Synthetic function networks built from classic global-optimization test
functions, plus the two-node max-branch chain used for consistency smoke tests."""

from __future__ import annotations

import math

import numpy as np

from ..network import KnownFunction, NetworkProblem, NetworkTopology
from ..numerics import BoxBounds

# Extremes of sqrt(x)*sin(x) on [0, 10], polished from a dense grid with a
# high-precision root finder on the derivative. A K-node product chain attains
# its maximum with one coordinate at the minimizing abscissa (odd sign count)
# and the rest at the maximizing one.
_FACTOR_MAX = 2.8081311800070049  # at x = 7.9170526846662071
_FACTOR_MIN = -2.1827697846777220  # at x = 4.8158423178459354

# Interior optimum of max(1, 1.5 sin(3x) + 0.2) - x on [0, 1] from a 1e5-point
# grid polished on the smooth branch (4.5 cos(3x) = 1).
_PROP2_OPTIMUM = 1.2135929864008451


def alpine2_reference_optimum(k: int) -> float:
    return _FACTOR_MAX ** (k - 1) * abs(_FACTOR_MIN)


def alpine2_network(k: int = 6) -> NetworkProblem:
    """Chain of K nodes on [0,10]^K; node k multiplies sqrt(x_k) sin(x_k) into the
    running product (the first node negated), so the leaf is -prod sqrt(x) sin(x)."""
    if k < 1:
        raise ValueError("need at least one node")

    def root_fn(z):
        return -math.sqrt(z[0]) * math.sin(z[0])

    def chain_fn(z):
        return math.sqrt(z[0]) * math.sin(z[0]) * z[1]

    topology = NetworkTopology(
        node_count=k,
        parents=[()] + [(i - 1,) for i in range(1, k)],
        input_coords=[(i,) for i in range(k)],
        decision_dim=k,
    )
    return NetworkProblem(
        name=f"alpine2_{k}",
        topology=topology,
        node_functions=[root_fn] + [chain_fn] * (k - 1),
        node_kinds=[None] * k,
        bounds=BoxBounds(lower=np.zeros(k), upper=np.full(k, 10.0)),
        reference_optimum=alpine2_reference_optimum(k),
    )


def ackley_network(d: int = 6) -> NetworkProblem:
    """Three nodes on [-2,2]^d: mean square and mean cosine of the full decision
    vector feed a combiner. All three nodes are modeled as surrogates."""
    if d < 1:
        raise ValueError("need at least one dimension")

    def mean_square(z):
        return float(np.mean(np.square(z)))

    def mean_cosine(z):
        return float(np.mean(np.cos(2.0 * math.pi * np.asarray(z))))

    def combiner(z):
        return 20.0 * math.exp(-0.2 * math.sqrt(z[0])) + math.exp(z[1]) - 20.0 - math.e

    topology = NetworkTopology(
        node_count=3,
        parents=[(), (), (0, 1)],
        input_coords=[tuple(range(d)), tuple(range(d)), ()],
        decision_dim=d,
    )
    return NetworkProblem(
        name=f"ackley{d}",
        topology=topology,
        node_functions=[mean_square, mean_cosine, combiner],
        node_kinds=[None, None, None],
        bounds=BoxBounds(lower=np.full(d, -2.0), upper=np.full(d, 2.0)),
        reference_optimum=0.0,
    )


def rosenbrock_network(d: int = 5) -> NetworkProblem:
    """Chain of d-1 nodes on [-2,2]^d accumulating the negated Rosenbrock sum;
    node k reads coordinates (k, k+1) and the running partial sum."""
    if d < 3:
        raise ValueError("need at least three dimensions")

    def term(xk, xk1):
        return -100.0 * (xk1 - xk * xk) ** 2 - (1.0 - xk) ** 2

    def root_fn(z):
        return term(z[0], z[1])

    def chain_fn(z):
        return term(z[0], z[1]) + z[2]

    k = d - 1
    topology = NetworkTopology(
        node_count=k,
        parents=[()] + [(i - 1,) for i in range(1, k)],
        input_coords=[(i, i + 1) for i in range(k)],
        decision_dim=d,
    )
    return NetworkProblem(
        name=f"rosenbrock{k}",
        topology=topology,
        node_functions=[root_fn] + [chain_fn] * (k - 1),
        node_kinds=[None] * k,
        bounds=BoxBounds(lower=np.full(d, -2.0), upper=np.full(d, 2.0)),
        reference_optimum=0.0,
    )


def dropwave_network() -> NetworkProblem:
    """Two-node chain on [-5.12, 5.12]^2: the Euclidean norm feeds a heavily
    oscillating scalar response with global maximum 1 at the origin."""

    def radius(z):
        return math.hypot(z[0], z[1])

    def wave(z):
        return (1.0 + math.cos(12.0 * z[0])) / (2.0 + 0.5 * z[0] * z[0])

    topology = NetworkTopology(
        node_count=2,
        parents=[(), (0,)],
        input_coords=[(0, 1), ()],
        decision_dim=2,
    )
    return NetworkProblem(
        name="dropwave",
        topology=topology,
        node_functions=[radius, wave],
        node_kinds=[None, None],
        bounds=BoxBounds(lower=np.full(2, -5.12), upper=np.full(2, 5.12)),
        reference_optimum=1.0,
    )


def prop2_network() -> NetworkProblem:
    """Two-node chain on [0,1]: a smooth surrogate root feeds the known map
    max(1, y) - x, whose flat branch lets the optimizer rule out whole regions."""

    def root_fn(z):
        return 1.5 * math.sin(3.0 * z[0]) + 0.2

    def known_fn(z):
        return max(1.0, z[1]) - z[0]

    def known_grad(z):
        return np.array([-1.0, 1.0 if z[1] > 1.0 else 0.0])

    def known_batch_fn(z):
        return np.maximum(1.0, z[:, 1]) - z[:, 0]

    def known_batch_grad(z):
        g = np.empty_like(z)
        g[:, 0] = -1.0
        g[:, 1] = (z[:, 1] > 1.0).astype(float)
        return g

    topology = NetworkTopology(
        node_count=2,
        parents=[(), (0,)],
        input_coords=[(0,), (0,)],
        decision_dim=1,
    )
    leaf = KnownFunction(
        fn=known_fn, grad=known_grad, batch_fn=known_batch_fn, batch_grad=known_batch_grad
    )
    return NetworkProblem(
        name="prop2_chain",
        topology=topology,
        node_functions=[root_fn, leaf.fn],
        node_kinds=[None, leaf],
        bounds=BoxBounds(lower=np.zeros(1), upper=np.ones(1)),
        reference_optimum=_PROP2_OPTIMUM,
    )

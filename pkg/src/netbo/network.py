"""Function-network problems: DAG topology, node kinds, domains, and evaluation
of the true network at a point.

A network has K scalar nodes in topological order. Node k consumes the decision
coordinates listed in ``input_coords[k]`` followed by the outputs of its parents
``parents[k]`` (all indices 0-based), and the single leaf (node K-1) is the
objective to maximize.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    CycleOrOrderError,
    IndexOutOfRange,
    InfeasiblePoint,
    MultipleLeavesError,
)
from .numerics import BoxBounds, SimplexConstraint


@dataclass(frozen=True)
class NetworkTopology:
    """DAG wiring: per-node parent lists and decision-coordinate lists."""

    node_count: int
    parents: tuple  # tuple of K tuples of parent node indices, each < k
    input_coords: tuple  # tuple of K tuples of decision-coordinate indices
    decision_dim: int

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(tuple(p) for p in self.parents))
        object.__setattr__(
            self, "input_coords", tuple(tuple(c) for c in self.input_coords)
        )

    def node_input_dim(self, k: int) -> int:
        return len(self.input_coords[k]) + len(self.parents[k])


@dataclass(frozen=True)
class KnownFunction:
    """Analytic node: cheap to evaluate, excluded from GP modeling.

    ``fn`` maps the node input vector z = (x_{I(k)}, y_{J(k)}) to a scalar and
    ``grad`` returns d fn / d z. Known nodes behave as zero-variance surrogates.
    ``batch_fn``/``batch_grad`` optionally vectorize over stacked input rows.
    """

    fn: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    batch_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    batch_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None


# A node is either modeled by a GP (None) or fixed to a known analytic function.
NodeKind = Optional[KnownFunction]


def validate_topology(topology: NetworkTopology) -> NetworkTopology:
    """Check ordering, index ranges, and the single-leaf property.

    Returns the topology unchanged when valid. Nodes must be topologically
    ordered (every parent index below the node index), every non-final node must
    feed at least one later node, and the final node must feed none.
    """
    k_count = topology.node_count
    if k_count < 1:
        raise IndexOutOfRange("node_count must be >= 1")
    if len(topology.parents) != k_count or len(topology.input_coords) != k_count:
        raise IndexOutOfRange("parents/input_coords length must equal node_count")
    if topology.decision_dim < 1:
        raise IndexOutOfRange("decision_dim must be >= 1")
    referenced = set()
    for k in range(k_count):
        for j in topology.parents[k]:
            if not 0 <= j < k_count:
                raise IndexOutOfRange(f"node {k} lists parent {j} out of range")
            if j >= k:
                raise CycleOrOrderError(
                    f"node {k} lists parent {j}; parents must precede the node"
                )
            referenced.add(j)
        for d in topology.input_coords[k]:
            if not 0 <= d < topology.decision_dim:
                raise IndexOutOfRange(f"node {k} uses decision coordinate {d}")
        if len(topology.input_coords[k]) + len(topology.parents[k]) == 0:
            raise IndexOutOfRange(f"node {k} has no inputs at all")
    if k_count - 1 in referenced:
        raise MultipleLeavesError("final node must not feed any other node")
    orphans = [k for k in range(k_count - 1) if k not in referenced]
    if orphans:
        raise MultipleLeavesError(
            f"nodes {orphans} feed nothing; the network must have a single leaf"
        )
    return topology


@dataclass(frozen=True)
class NetworkProblem:
    """A registered optimization problem over a function network.

    ``node_functions`` holds the true per-node maps z -> h_k (expensive black
    boxes in real deployments; analytic here for benchmarking), in node order.
    ``node_kinds[k]`` is a KnownFunction when the optimizer is allowed to exploit
    node k analytically, else None and the node is modeled by a surrogate.
    """

    name: str
    topology: NetworkTopology
    node_functions: tuple
    node_kinds: tuple
    bounds: BoxBounds
    constraint: Optional[SimplexConstraint] = None
    reference_optimum: Optional[float] = None

    def __post_init__(self):
        validate_topology(self.topology)
        if len(self.node_functions) != self.topology.node_count:
            raise IndexOutOfRange("need one node function per node")
        if len(self.node_kinds) != self.topology.node_count:
            raise IndexOutOfRange("need one node kind per node")
        if self.bounds.dim != self.topology.decision_dim:
            raise IndexOutOfRange("bounds dimension must match decision_dim")
        object.__setattr__(self, "node_functions", tuple(self.node_functions))
        object.__setattr__(self, "node_kinds", tuple(self.node_kinds))

    @property
    def decision_dim(self) -> int:
        return self.topology.decision_dim

    @property
    def node_count(self) -> int:
        return self.topology.node_count

    def is_feasible(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        if not self.bounds.contains(x, tol):
            return False
        if self.constraint is not None and not self.constraint.satisfied(x, tol):
            return False
        return True

    def node_input(self, k: int, x: np.ndarray, h: np.ndarray) -> np.ndarray:
        """Assemble z_k = (x_{I(k)}, h_{J(k)}) from a decision and node outputs."""
        coords = self.topology.input_coords[k]
        parents = self.topology.parents[k]
        z = np.empty(len(coords) + len(parents))
        z[: len(coords)] = x[list(coords)]
        z[len(coords):] = h[list(parents)]
        return z


def evaluate_network(problem: NetworkProblem, x: np.ndarray) -> np.ndarray:
    """Evaluate all node outputs (h_1, ..., h_K) at x by forward recursion.

    The objective value is the final component. Raises InfeasiblePoint when x
    violates the problem bounds or budget constraint.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.decision_dim,):
        raise InfeasiblePoint(
            f"expected a vector of length {problem.decision_dim}, got shape {x.shape}"
        )
    if not problem.is_feasible(x):
        raise InfeasiblePoint(f"point {x!r} outside the feasible set of {problem.name}")
    h = np.empty(problem.node_count)
    for k in range(problem.node_count):
        h[k] = problem.node_functions[k](problem.node_input(k, x, h))
    return h


# ---------------------------------------------------------------------------
# Problem registry (populated by the benchmarks package on import).
# ---------------------------------------------------------------------------

_REGISTRY: dict = {}


def register_problem(problem_id: str, factory: Callable[[], NetworkProblem]) -> None:
    if problem_id in _REGISTRY:
        raise ValueError(f"problem id {problem_id!r} already registered")
    _REGISTRY[problem_id] = factory


def get_problem(problem_id: str) -> NetworkProblem:
    from . import benchmarks  # noqa: F401  (populates the registry)

    try:
        factory = _REGISTRY[problem_id]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY))
        raise KeyError(f"unknown problem {problem_id!r}; registered: {known}") from None
    return factory()


def problem_ids() -> list:
    from . import benchmarks  # noqa: F401

    return sorted(_REGISTRY)

"""Serial production line: four single-server Markovian stations with finite
buffers, service rates constrained by a shared budget, objective the steady-state
throughput of the final station."""

from __future__ import annotations

import numpy as np

from ..network import NetworkProblem, NetworkTopology
from ..numerics import BoxBounds, SimplexConstraint

ARRIVAL_RATE = 1.0
BUFFER_SLOTS = 10
N_STATIONS = 4

# Budget-face optimum found offline by multi-start SLSQP over the simplex with a
# confirming local grid scan; the landscape is nearly flat around equal split.
_REFERENCE_OPTIMUM = 0.20678294765400476


def station_throughput(arrival: float, service_rate: float, buffer_slots: int = BUFFER_SLOTS) -> float:
    """Steady-state throughput arrival * (1 - blocking) of an M/M/1 queue with
    system capacity ``buffer_slots``.

    The blocking probability is rho^b / sum_{i<=b} rho^i, evaluated through
    geometric sums of the smaller of rho and 1/rho so the expression stays
    stable for any load including rho = 1. A dead station (zero rates either
    side) passes zero flow.
    """
    if arrival <= 0.0 or service_rate <= 0.0:
        return 0.0
    rho = arrival / service_rate
    if rho <= 1.0:
        passed = sum(rho**i for i in range(buffer_slots))
        total = passed + rho**buffer_slots
    else:
        r = 1.0 / rho
        passed = sum(r**j for j in range(1, buffer_slots + 1))
        total = passed + 1.0
    return arrival * passed / total


def manufacturing_network() -> NetworkProblem:
    """Four stations in series on the simplex {x >= 0, sum x <= 1}; station k has
    service rate x_k and receives the upstream throughput (external rate 1)."""

    def first_station(z):
        return station_throughput(ARRIVAL_RATE, z[0])

    def downstream_station(z):
        return station_throughput(z[1], z[0])

    topology = NetworkTopology(
        node_count=N_STATIONS,
        parents=[()] + [(i - 1,) for i in range(1, N_STATIONS)],
        input_coords=[(i,) for i in range(N_STATIONS)],
        decision_dim=N_STATIONS,
    )
    return NetworkProblem(
        name="manufacturing",
        topology=topology,
        node_functions=[first_station] + [downstream_station] * (N_STATIONS - 1),
        node_kinds=[None] * N_STATIONS,
        bounds=BoxBounds(lower=np.zeros(N_STATIONS), upper=np.ones(N_STATIONS)),
        constraint=SimplexConstraint(cap=1.0),
        reference_optimum=_REFERENCE_OPTIMUM,
    )

"""Benchmark problems shipped with the library, registered by string id."""

from ..network import register_problem
from .covid import CovidParams, TestErrorModel, covid_network, pooled_test_characteristics
from .epidemic import BETA_STAR, SISParams, sis_calibration_network, sis_trajectory
from .manufacturing import manufacturing_network, station_throughput
from .synthetic import (
    ackley_network,
    alpine2_network,
    alpine2_reference_optimum,
    dropwave_network,
    prop2_network,
    rosenbrock_network,
)

register_problem("dropwave", dropwave_network)
register_problem("ackley6", lambda: ackley_network(6))
register_problem("rosenbrock4", lambda: rosenbrock_network(5))
register_problem("alpine2_6", lambda: alpine2_network(6))
register_problem("manufacturing", manufacturing_network)
register_problem("sis_calibration", sis_calibration_network)
register_problem("covid_testing", covid_network)
register_problem("prop2_chain", prop2_network)

__all__ = [
    "BETA_STAR",
    "CovidParams",
    "SISParams",
    "TestErrorModel",
    "ackley_network",
    "alpine2_network",
    "alpine2_reference_optimum",
    "covid_network",
    "dropwave_network",
    "manufacturing_network",
    "pooled_test_characteristics",
    "prop2_network",
    "rosenbrock_network",
    "sis_calibration_network",
    "sis_trajectory",
    "station_throughput",
]

import numpy as np
import pytest

from netbo.acquisition import feasible_uniform
from netbo.harness import initial_design
from netbo.netmodel import fit_network_model
from netbo.network import evaluate_network, get_problem


def build_model(problem_id, n_extra=0, seed=0, fit_seed=1):
    """Fit a network model on the standard initial design plus extra points."""
    problem = get_problem(problem_id)
    points = initial_design(problem, seed)
    if n_extra:
        points = np.vstack(
            [points, feasible_uniform(problem, np.random.default_rng(seed + 1), n_extra)]
        )
    values = np.array([evaluate_network(problem, x) for x in points])
    return fit_network_model(problem, points, values, fit_seed)


@pytest.fixture(scope="session")
def dropwave_model():
    return build_model("dropwave", n_extra=10)


@pytest.fixture(scope="session")
def prop2_model():
    return build_model("prop2_chain", n_extra=4)

import numpy as np
import pytest

from nntuck.experiments import synthetic_network
from nntuck.model import MultilayerNetwork


def random_problem(seed, N=None, L=None, undirected=False):
    """Small random count network for solver property checks."""
    rng = np.random.default_rng(seed)
    N = N or int(rng.integers(4, 16))
    L = L or int(rng.integers(2, 6))
    A = rng.poisson(rng.uniform(0.2, 2.0), (N, N, L)).astype(float)
    if undirected:
        upper = np.triu(np.ones((N, N), dtype=bool))[:, :, None]
        A = np.where(upper, A, A.transpose(1, 0, 2))
    return MultilayerNetwork(A, directed=not undirected)


@pytest.fixture(scope="session")
def synthetic1():
    return synthetic_network(1, seed=0)


@pytest.fixture(scope="session")
def synthetic2():
    return synthetic_network(2, seed=0)


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)

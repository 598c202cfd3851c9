import numpy as np
import pytest

from onebit_dma.signal_model import Scenario, SystemDims, generate_channel, random_combiner

ACCEPTANCE_LINES = []


def make_instance(seed, K=2, N_d=3, N_e=4, rho_db=10.0, beta_de=None):
    """A scenario with its channel and a random analog combiner."""
    rng = np.random.default_rng(seed)
    dims = SystemDims(K, N_d, N_e)
    sc = Scenario.from_db(dims, rho_db) if beta_de is None else Scenario.from_db(dims, rho_db, beta_de)
    H = generate_channel(dims, rng)
    Q = random_combiner(dims, rng)
    return sc, H, Q


@pytest.fixture
def instance():
    return make_instance(0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

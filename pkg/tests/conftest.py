import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qconsensus import (  # noqa: E402
    RdModel,
    complete_graph,
    generate_connected_rgg,
    initial_state,
    metropolis_weights,
    path_graph,
    signal_plus_noise_state,
)


@pytest.fixture
def w_pair():
    return metropolis_weights(complete_graph(2))


@pytest.fixture
def unit_pair_state():
    return initial_state(np.zeros(2), np.eye(2))


@pytest.fixture
def w_path3():
    return metropolis_weights(path_graph(3))


@pytest.fixture
def path3_state():
    return signal_plus_noise_state(3, 1.0, 0.5)


@pytest.fixture
def vq():
    return RdModel("vq_proxy")


@pytest.fixture(scope="session")
def rgg20():
    g, _ = generate_connected_rgg(20, 0.35, 1)
    return g, metropolis_weights(g), signal_plus_noise_state(20, 1.0, 0.5)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])

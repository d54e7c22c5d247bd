import numpy as np
import pytest

from dislocbc.cellsolve import algorithm41
from dislocbc.models import build_model
from dislocbc.spectral import SpectralConfig, solve_predictor

# lines reported by test_acceptance, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(set(ACCEPTANCE_LINES), key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def model():
    return build_model()


@pytest.fixture(scope="session")
def even_model():
    return build_model({"potential": {"alpha": [0.0, 0.0, 0.0]}})


@pytest.fixture(scope="session")
def edge_model():
    return build_model({"dislocation": {"kind": "edge"}})


@pytest.fixture(scope="session")
def u1(model):
    return solve_predictor(model, SpectralConfig(), i=1)


@pytest.fixture(scope="session")
def reference(model, u1):
    """Reference solve at R_dom = 100 shared by the cell-solver tests."""
    return algorithm41(model, 100.0, u1=u1, energy_radius=300.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

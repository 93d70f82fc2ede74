import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import A_BENCH, C_BENCH  # noqa: E402
from rrobserver import PlantModel, SynthesisProblem, design_observer  # noqa: E402


@pytest.fixture(scope="session")
def A_bench():
    return A_BENCH.copy()


@pytest.fixture(scope="session")
def C_bench():
    return C_BENCH.copy()


@pytest.fixture(scope="session")
def bench_plant():
    return PlantModel(A_BENCH, C_BENCH)


@pytest.fixture(scope="session")
def bench_design(bench_plant):
    """The T = 0.02, d_bar = 4, lambda = 20 design, solved once per session."""
    problem = SynthesisProblem(bench_plant, 0.02, 4, 20.0)
    return design_observer(problem)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

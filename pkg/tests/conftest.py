import numpy as np
import pytest

from asgsflow.mesh import build_unit_square_mesh


@pytest.fixture(scope="session")
def mesh4():
    return build_unit_square_mesh(4)


@pytest.fixture(scope="session")
def mesh8():
    return build_unit_square_mesh(8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    import sys

    for name, module in list(sys.modules.items()):
        if name.endswith("test_acceptance") and getattr(module, "RESULTS", None):
            terminalreporter.section("acceptance criteria")
            for key in sorted(module.RESULTS):
                terminalreporter.write_line(module.RESULTS[key])

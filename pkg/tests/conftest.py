import numba
import numpy as np
import pytest

from fastswitch import HybridModel
from fastswitch.averaged import VectorField


@numba.njit
def ou_drift(x, i):
    return -x


@numba.njit
def ou_diffusion(x, i):
    return np.ones((1, 1))


@numba.njit
def decay_drift(x, i):
    return -x


@numba.njit
def zero_diffusion(x, i):
    return np.zeros((1, 1))


@numba.njit
def hopf(z):
    x, y = z[0], z[1]
    r2 = x * x + y * y
    out = np.empty(2)
    out[0] = x * (1 - r2) - y
    out[1] = y * (1 - r2) + x
    return out


@numba.njit
def hopf_drift(z, i):
    return hopf(z)


@numba.njit
def zero_diffusion_2(z, i):
    return np.zeros((2, 2))


def ou_model():
    return HybridModel(1, 1, ou_drift, ou_diffusion, [[0.0]], name="ou")


def decay_model():
    return HybridModel(1, 1, decay_drift, zero_diffusion, [[0.0]], name="decay")


def hopf_model():
    return HybridModel(2, 2, hopf_drift, zero_diffusion_2, [[0.0]], name="hopf")


@pytest.fixture(scope="session")
def ou():
    return ou_model()


@pytest.fixture(scope="session")
def decay():
    return decay_model()


@pytest.fixture(scope="session")
def hopf_field():
    return VectorField(hopf, 2)


@pytest.fixture(scope="session")
def example_model():
    from fastswitch import paper_example_model
    return paper_example_model()


@pytest.fixture(scope="session")
def example_field(example_model):
    from fastswitch import average_field
    return average_field(example_model)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)

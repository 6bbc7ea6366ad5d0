import numpy as np
import pytest

from walkmpc.model import LipmParams, closed_loop, deadbeat_gain, discretize_lipm
from walkmpc.stochastic import DisturbanceModel

REF_GAIN = np.array([[3.386, 0.968]])


@pytest.fixture(scope="session")
def model():
    return discretize_lipm(LipmParams())


@pytest.fixture(scope="session")
def dist():
    return DisturbanceModel.default()


@pytest.fixture(scope="session")
def K_db(model):
    return deadbeat_gain(model)


@pytest.fixture(scope="session")
def A_db(model, K_db):
    return closed_loop(model, K_db)


@pytest.fixture(scope="session")
def A_ref(model):
    return closed_loop(model, REF_GAIN)


_ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record a one-line verdict for an acceptance criterion."""
    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])

import sys
import math

import pytest

from delayhopf.chareq import SystemParams
from delayhopf.models import NicholsonModel, nicholson_linearize

TAU_EX = 0.3782
P_EX = 3 * math.exp(2.5)


@pytest.fixture(scope="session")
def nich_model():
    return NicholsonModel(2.0, P_EX, 1.0)


@pytest.fixture(scope="session")
def nich_lin(nich_model):
    return nicholson_linearize(nich_model, TAU_EX)


@pytest.fixture(scope="session")
def ex_params():
    return SystemParams(2.0, 4.5, 1.0, TAU_EX)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])

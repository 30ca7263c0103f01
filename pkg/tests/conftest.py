import numpy as np
import pytest

from aoi_pomdp import ChannelModel, CostModel, LtiModel
from aoi_pomdp.channel import Q_GB, T_C1, T_C2

A_EX = np.array([[0.9974, 0.0539], [-0.1078, 0.1591]])
C_EX = np.array([[1.0, 0.0]])
R_W_EX = 0.25 * np.eye(2)
R_V_EX = np.array([[0.05]])

# Posterior covariance fixed point, recorded from forward Riccati iteration at tol 1e-12.
P_BAR_EX = np.array([[0.04271566, -0.00035596], [-0.00035596, 0.25699651]])
P_BAR_TRACE_EX = 0.29971217553462953


@pytest.fixture
def lti():
    return LtiModel(A_EX, C_EX, R_W_EX, R_V_EX, np.eye(2))


@pytest.fixture
def channel():
    return ChannelModel(T_C1, Q_GB, 0.5, 3)


@pytest.fixture
def channel_t2():
    return ChannelModel(T_C2, Q_GB, 0.5, 3)


@pytest.fixture
def cost(lti):
    return CostModel.from_lti(lti, 2, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one acceptance line: ``report(ok, label, detail)``."""

    def add(ok, label, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return add


@pytest.fixture
def info():
    def add(label, detail):
        line = f"INFO  {label}  ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

import numpy as np
import pytest

from cpo.params import SystemParams

# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def record(criterion, passed, detail):
    ACCEPTANCE[criterion] = (bool(passed), detail)
    print(f"CRITERION {criterion}: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def cross_params():
    """gamma=1, eps=0.5, Gamma=100, omega1=omega0, Omega=5, delta=2."""
    return SystemParams(gamma=1.0, epsilon=0.5, Gamma_coh=100.0, omega0=0.0, omega1=0.0,
                        omega2=-2.0, Omega1=5.0, Omega2=5.0, n1_eq=0.8, n0_eq=0.2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)

import os
import warnings

import pytest

from zeropi.params import BasisSpec, parameter_set

# Filled by tests/test_acceptance.py, printed after the run.
ACCEPTANCE_LINES = []


def record(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'} criterion {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(autouse=True)
def _quiet_library_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=UserWarning)
        yield


@pytest.fixture(scope="session")
def ps2():
    return parameter_set("PS2")


@pytest.fixture(scope="session")
def small_basis():
    """Coarse basis: quick solves, qualitatively right physics for PS2."""
    return BasisSpec(n_theta_max=6, phi_points=121, phi_max=18.0, n_zeta_max=3)


@pytest.fixture(scope="session")
def tiny_basis():
    """Basis small enough for dense diagonalization of the 3D problem."""
    return BasisSpec(n_theta_max=3, phi_points=61, phi_max=15.0, n_zeta_max=3)


@pytest.fixture(scope="session")
def bundled_run():
    """``(status, out_dir)`` of a bundled config run, computed once per session."""
    from bundled import run_bundled

    return run_bundled


def pytest_configure(config):
    os.environ.setdefault("ZEROPI_MAX_DIM", "4000000")

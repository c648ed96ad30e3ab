import numpy as np
import pytest

from cqed_hofstadter.lattice import LatticeSpec, lattice_hamiltonian
from cqed_hofstadter.spectrum import diagonalize, find_gaps


@pytest.fixture(scope="session")
def quarter_spec():
    return LatticeSpec(p=1, q=4)


@pytest.fixture(scope="session")
def quarter_H(quarter_spec):
    return lattice_hamiltonian(quarter_spec)


@pytest.fixture(scope="session")
def quarter_modes(quarter_H):
    return diagonalize(quarter_H)


@pytest.fixture(scope="session")
def quarter_gaps(quarter_modes):
    return find_gaps(quarter_modes, 1, 4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one PASS/FAIL line per acceptance check for the terminal summary."""

    def log(criterion: str, ok: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {criterion}: {detail}")

    return log


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

import numpy as np
import pytest

from anisobec import core

# collected acceptance-criterion outcomes, printed in the terminal summary
ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


def record_criterion(name: str, passed: bool, detail: str = ""):
    ACCEPTANCE_RESULTS[name] = (passed, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[name]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status}  {name}  {detail}")


@pytest.fixture(scope="session")
def rb87():
    return core.AtomSpecies.rb87()


@pytest.fixture(scope="session")
def trap_q2(rb87):
    return core.TrapConfig.harmonic_cigar(rb87, 350.0, 3.5)


@pytest.fixture(scope="session")
def units_q2(rb87, trap_q2):
    return core.UnitSystem.from_species_trap(rb87, trap_q2)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260809)

import warnings

import pytest

from slitloops import KernelEvaluator, preset, validate

# criterion number -> (passed, one-line detail), filled by test_acceptance
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


def quiet_validate(setup):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return validate(setup)


@pytest.fixture(scope="session")
def photon():
    return validate(preset("photon"))


@pytest.fixture(scope="session")
def photon_eval(photon):
    return KernelEvaluator(photon)


@pytest.fixture(scope="session")
def microwave():
    return quiet_validate(preset("microwave"))

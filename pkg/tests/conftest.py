import pytest

from ovrv.model import MAX_SETTING, MIN_SETTING, ModelParams


@pytest.fixture
def min_params():
    return MIN_SETTING


@pytest.fixture
def max_params():
    return MAX_SETTING


@pytest.fixture
def step_unstable():
    return ModelParams(k1=0.5, k2=0.5, tau_e=0.75, eta=8.0)


@pytest.fixture
def step_stable():
    return ModelParams(k1=0.5, k2=0.5, tau_e=3.2, eta=8.0)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS, key=lambda k: int(k.split()[0][2:])):
        ok, detail = RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")

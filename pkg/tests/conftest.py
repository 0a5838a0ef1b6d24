import warnings

import numpy as np
import pytest

from levyheat.errors import ScopeWarning
from levyheat.kato import constant, indicator_well
from levyheat.perturbation import default_torus, perturbed_kernel
from levyheat.profiles import fractional, tempered
from levyheat.symbol import build_symbol_table

_CRITERIA_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_CRITERIA_KEY] = {}
    warnings.simplefilter("ignore", ScopeWarning)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_CRITERIA_KEY, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok, detail = results[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def criterion(request):
    """``criterion(number, ok, detail)`` records one acceptance line and asserts ``ok``."""
    store = request.config.stash[_CRITERIA_KEY]

    def record(number: int, ok: bool, detail: str) -> None:
        prev = store.get(number)
        if prev is not None:
            ok, detail = prev[0] and ok, f"{prev[1]}; {detail}"
        store[number] = (bool(ok), detail)
        assert ok, f"criterion {number}: {detail}"

    return record


@pytest.fixture(scope="session")
def cauchy():
    return build_symbol_table(fractional(1.0))


@pytest.fixture(scope="session")
def tempered15():
    return build_symbol_table(tempered(1.5, 1.0))


@pytest.fixture(scope="session")
def cauchy_torus(cauchy):
    return default_torus(cauchy)


@pytest.fixture(scope="session")
def well():
    return indicator_well(2.0, 1.0, 1)


@pytest.fixture(scope="session")
def unit_constant():
    return constant(1.0, 1)


@pytest.fixture(scope="session")
def well_kernel(cauchy_torus, well):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ScopeWarning)
        return perturbed_kernel(cauchy_torus, well, 0.5, extra_times=(0.2, 0.3))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(7)

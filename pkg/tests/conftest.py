import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from coad.library import build_full_library, build_library
from coad.scenario import load_scenario

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

REFERENCE_SEED = 42

_scenarios = {}
_libraries = {}


def scenario(name):
    if name not in _scenarios:
        _scenarios[name] = load_scenario(name)
    return _scenarios[name]


def library(name, adapter, seed=REFERENCE_SEED):
    """Build once per session; (library, report) keyed by scenario, adapter and seed."""
    key = (name, adapter, seed)
    if key not in _libraries:
        scn = scenario(name)
        if adapter == "full":
            _libraries[key] = build_full_library(scn, seed=seed)
        else:
            _libraries[key] = build_library(scn, adapter, seed=seed)
    return _libraries[key]


@pytest.fixture(scope="session")
def table():
    return scenario("table")


@pytest.fixture(scope="session")
def shelf():
    return scenario("shelf")


@pytest.fixture(scope="session")
def table_li():
    return library("table", "li")[0]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria report: one line per criterion in the terminal summary
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {status}: {title}" + (f" ({detail})" if detail else ""))

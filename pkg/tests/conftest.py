import os

import pytest
from hypothesis import HealthCheck, settings

from echelon.cli_io import load_fixture
from echelon.poly_ring import Field, PolyRing

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repo"))


@pytest.fixture
def R():
    return PolyRing()


@pytest.fixture
def R7():
    return PolyRing(field=Field(7))


@pytest.fixture
def r1():
    return load_fixture("r1").datum


@pytest.fixture
def r2():
    return load_fixture("r2").datum


@pytest.fixture
def persistence_bad():
    return load_fixture("persistence").datum


_AC_LINES = []


@pytest.fixture
def ac_line(capsys):
    """Record one pass/fail line per acceptance criterion (echoed in the summary)."""

    def emit(name, ok, detail=""):
        line = f"{name} {'PASS' if ok else 'FAIL'}" + (f": {detail}" if detail else "")
        _AC_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if _AC_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _AC_LINES:
            terminalreporter.write_line(line)

import os

import pytest
from hypothesis import HealthCheck, settings

from recoherence import BathSpec

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def bath10():
    """m = 10, Gamma m = 0.1."""
    return BathSpec.build(10.0, 0.01)


@pytest.fixture(scope="session")
def bath_sudden():
    return BathSpec.build(10.0, 0.01, resolve_time=10.0)


@pytest.fixture
def outroot(tmp_path, monkeypatch):
    monkeypatch.setenv("RECOHERENCE_OUTPUT_ROOT", str(tmp_path))
    return tmp_path


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])

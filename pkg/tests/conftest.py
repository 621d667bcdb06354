import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA = {}


@pytest.fixture
def report(request):
    """Record and echo an acceptance verdict line, e.g. ``report(3, True, "...")``."""
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def _report(number, passed, detail=""):
        verdict = passed if isinstance(passed, str) else ("PASS" if passed else "FAIL")
        line = f"CRITERION {number}: {verdict}  {detail}".rstrip()
        _CRITERIA[number] = line
        with capman.global_and_fixture_disabled():
            print("\n" + line, flush=True)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])

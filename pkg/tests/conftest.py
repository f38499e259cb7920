import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("koblab", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("koblab")

ACCEPTANCE = []


@pytest.fixture
def report():
    """Record one acceptance line: ``report(number, ok, detail, seconds)``."""
    def add(number, ok, detail, seconds):
        ACCEPTANCE.append((number, bool(ok), detail, seconds))
    return add


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail, seconds in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  ({seconds:.1f} s)  {detail}")

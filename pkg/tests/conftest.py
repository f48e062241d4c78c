import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def params():
    from qfp.cells import AqfpCellParams

    return AqfpCellParams()


def pytest_terminal_summary(terminalreporter):
    from criteria import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, title, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n:>2} {'PASS' if ok else 'FAIL'}: {title}: {detail}")

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("dopt", deadline=None, max_examples=50, derandomize=True)
settings.load_profile("dopt")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one PASS/FAIL line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE = {}


def record_acceptance(criterion, check, ok, detail):
    ACCEPTANCE.setdefault(criterion, []).append((check, bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[criterion]
        verdict = "PASS" if all(ok for _, ok, _ in checks) else "FAIL"
        terminalreporter.write_line("criterion {}: {}".format(criterion, verdict))
        for check, ok, detail in checks:
            terminalreporter.write_line("    [{}] {}: {}".format("pass" if ok else "FAIL", check, detail))

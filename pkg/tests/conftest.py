import pytest

_ACCEPTANCE: list[tuple[str, str, list]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE.append((report.nodeid.split("::")[-1], report.outcome, report.user_properties))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, props in _ACCEPTANCE:
        detail = "; ".join(f"{k}={v}" for k, v in props)
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}  {detail}")


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(12345)

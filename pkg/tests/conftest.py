"""Shared pytest wiring: one summary line per acceptance criterion."""

from collections import OrderedDict

_ACCEPTANCE_OUTCOMES: "OrderedDict[str, str]" = OrderedDict()


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        outcome = report.outcome.upper()
        if hasattr(report, "wasxfail") and report.wasxfail:
            outcome = "XFAIL (documented defect)" if report.outcome == "skipped" else outcome
        previous = _ACCEPTANCE_OUTCOMES.get(name)
        if previous is None or outcome == "FAILED":
            _ACCEPTANCE_OUTCOMES[name] = outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_OUTCOMES:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in _ACCEPTANCE_OUTCOMES.items():
        label = {"PASSED": "PASS", "FAILED": "FAIL", "SKIPPED": "SKIP"}.get(outcome, outcome)
        terminalreporter.write_line(f"{label:>24s}  {name}")

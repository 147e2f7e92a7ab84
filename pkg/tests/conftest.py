import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA = {}
_SUMMARY = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _CRITERIA[report.nodeid] = report.outcome


def pytest_collection_modifyitems(items):
    for item in items:
        if "test_acceptance.py::test_criterion_" in item.nodeid:
            doc = (item.function.__doc__ or "").strip().splitlines()
            _SUMMARY[item.nodeid] = doc[0] if doc else ""


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid in sorted(_CRITERIA):
        number = int(nodeid.split("test_criterion_")[1][:2])
        verdict = "PASS" if _CRITERIA[nodeid] == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}: {verdict}  {_SUMMARY.get(nodeid, '')}")

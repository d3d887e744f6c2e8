import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# acceptance criterion id -> [title, passed?]; filled by test_acceptance.py
CRITERIA: dict[str, list] = {}


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    entry = CRITERIA.setdefault(crit[0], [crit[1], True])
    if report.failed or (report.when == "call" and report.skipped):
        entry[1] = False


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(CRITERIA):
        title, ok = CRITERIA[cid]
        terminalreporter.write_line(f"{cid} {'PASS' if ok else 'FAIL'}  {title}")

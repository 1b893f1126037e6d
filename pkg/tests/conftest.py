import os
import re
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
CACHE_ENV = "CAVDISS_ACCEPTANCE_CACHE"

_criteria: dict[str, dict] = {}
_CRITERION = re.compile(r"test_c(\d\d)_(\w+)")


@pytest.fixture(scope="session")
def acceptance_cache() -> Path:
    """Directory of cached traces shared by the acceptance criteria (and by reruns)."""
    path = Path(os.environ.get(CACHE_ENV) or ROOT / ".acceptance-cache")
    path.mkdir(parents=True, exist_ok=True)
    return path


@pytest.fixture
def measured(request):
    """Attach a one-line measurement to the criterion summary."""
    def note(text: str) -> None:
        entry = _entry(request.node.name)
        entry["detail"] = f"{entry['detail']}; {text}" if entry["detail"] else text

    return note


def _entry(name: str) -> dict:
    m = _CRITERION.match(name)
    key = (m.group(1), m.group(2)) if m else (name, "")
    return _criteria.setdefault(key, {"outcome": None, "detail": ""})


def pytest_runtest_logreport(report):
    name = report.nodeid.split("::")[-1]
    if not _CRITERION.match(name):
        return
    entry = _entry(name)
    if report.failed:
        entry["outcome"] = "FAIL"
    elif entry["outcome"] == "FAIL":
        pass
    elif report.skipped:
        entry["outcome"] = "SKIP"
    elif report.when == "call":
        entry["outcome"] = "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for (num, slug), entry in sorted(_criteria.items()):
        line = f"criterion {num} {slug:<28} {entry['outcome'] or 'NOT RUN'}"
        if entry["detail"]:
            line += f"  ({entry['detail']})"
        terminalreporter.write_line(line)

from __future__ import annotations

import pytest

from stepsearch.generate import MockScriptBackend
from stepsearch.rewards import Scorer, ScriptedReward

# One PASS/FAIL line per acceptance criterion is printed after the run; the
# mapping is filled by the makereport hook below.
_ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(criterion): marks a test as one acceptance criterion",
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker and report.when == "call":
        criterion = marker.kwargs.get("criterion", item.name)
        _ACCEPTANCE_RESULTS[criterion] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, status in _ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"{status}  {criterion}")


# ------------------------------------------------------------ shared helpers

UNIFORM_SCRIPT = {
    "*": {
        "*": {
            "understand": ["The problem asks for a small arithmetic result."],
            "code": ["Compute it directly.\n```python\nx = 2 + 2\n```"],
            "reflect": ["The intermediate result still looks consistent."],
            "summary": ["Collecting everything: \\boxed{4}"],
        }
    }
}


@pytest.fixture
def neutral_scorer() -> Scorer:
    return Scorer(backend=ScriptedReward())


@pytest.fixture
def uniform_policy() -> MockScriptBackend:
    return MockScriptBackend.from_dict(UNIFORM_SCRIPT)

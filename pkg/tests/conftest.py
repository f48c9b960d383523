import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"


@pytest.fixture
def sample_text():
    return (DATA / "sample_setplay.sp").read_text()


@pytest.fixture
def truncated_sample_text(sample_text):
    """The sample cut after step 0, so its transition target is missing."""
    cut = sample_text.index(" (step :id 1")
    return sample_text[:cut] + "))\n"


# -- acceptance summary: one line per criterion ------------------------------

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    number, text = mark.args
    passed = rep.passed and _criteria.get(number, (True,))[0]
    _criteria[number] = (passed, text)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        passed, text = _criteria[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {text}")

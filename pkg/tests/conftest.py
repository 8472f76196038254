import pytest
from hypothesis import settings

from tldram.config import RunConfig

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

CRITERIA = []


def record_criterion(number, title, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {title}" + (f" ({detail})" if detail else "")
    CRITERIA.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)


@pytest.fixture
def small_config():
    return RunConfig().replace(**{"trace.n": 2000, "policy.kind": "benefit_based"})

import pytest

from regen_srs import fixtures
from regen_srs.models import solve_growth, solve_huggett


@pytest.fixture(scope="session")
def huggett_solution():
    return solve_huggett(fixtures.huggett_fixture())


@pytest.fixture(scope="session")
def growth_solution():
    return solve_growth(fixtures.growth_fixture())


_ACCEPTANCE: list = []


@pytest.fixture
def acceptance():
    """Collects ``(criterion, ok, detail)`` lines for the terminal summary."""
    def record(name: str, ok: bool, detail: str = ""):
        line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else "")
        print(line)
        _ACCEPTANCE.append(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)

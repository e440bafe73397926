import pytest

# (number, title, passed, detail) rows filled in by the acceptance tests
ACCEPTANCE_RESULTS = []


@pytest.fixture
def acceptance():
    def record(number, title, passed, detail):
        ACCEPTANCE_RESULTS.append((number, title, bool(passed), detail))
        print(f"[{'PASS' if passed else 'FAIL'}] {number:>2}. {title}: {detail}")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} {number:>2}. {title}: {detail}")

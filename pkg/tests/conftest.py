import pytest

ACCEPTANCE_LINES: dict[str, str] = {}


@pytest.fixture
def record_criterion():
    def record(cid: str, title: str, passed: bool, detail: str) -> None:
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {cid}: {title} :: {detail}"
        ACCEPTANCE_LINES[cid] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE_LINES, key=int):
        terminalreporter.write_line(ACCEPTANCE_LINES[cid])

import pytest

_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line: call with (passed, detail) before asserting."""
    name = request.node.get_closest_marker("criterion").args[0]

    def record(passed: bool, detail: str = ""):
        _ACCEPTANCE[name] = (bool(passed), detail)
        return passed

    return record


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion label")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[0])):
        passed, detail = _ACCEPTANCE[name]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")

import pytest

ACCEPTANCE: dict = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion; a test that errors before reporting is logged as FAIL."""
    key = request.node.name
    state = {}

    def report(number, title, ok, detail=""):
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        state["done"] = True
        ACCEPTANCE[number] = line
        print(line)
        assert ok, line

    yield report
    if not state and key not in ACCEPTANCE:
        ACCEPTANCE[key] = f"{key} FAIL  raised before reporting"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (isinstance(k, str), k)):
        terminalreporter.write_line(ACCEPTANCE[key])

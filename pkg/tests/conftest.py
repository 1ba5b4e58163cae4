"""Shared pytest plumbing: surface the acceptance PASS/FAIL lines in the
terminal summary (stdout of passing tests is otherwise captured)."""


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    lines = getattr(test_acceptance, "RESULT_LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

results: list[str] = []


def pytest_terminal_summary(terminalreporter):
    """Echo one line per acceptance criterion after the run, in any mode."""
    if results:
        terminalreporter.section("acceptance criteria")
        for line in results:
            terminalreporter.write_line(line)

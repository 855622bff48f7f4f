import criteria


def pytest_terminal_summary(terminalreporter):
    if criteria.LINES:
        terminalreporter.section("acceptance criteria")
        for line in criteria.LINES:
            terminalreporter.write_line(line)

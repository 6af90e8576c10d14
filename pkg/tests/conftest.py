"""Shared pytest plumbing: the acceptance verdict board.

Gate checks record one line each; the lines are replayed after the run so
they stay visible even though pytest captures test output.
"""

_verdicts = []


def record_verdict(line):
    _verdicts.append(line)


def pytest_terminal_summary(terminalreporter):
    if _verdicts:
        terminalreporter.section("acceptance verdicts")
        for line in _verdicts:
            terminalreporter.line(line)

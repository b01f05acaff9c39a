import sys
from pathlib import Path

# lets tests import the oracle and pipeline helpers as plain modules
sys.path.insert(0, str(Path(__file__).parent))

import acceptance_log  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not acceptance_log.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(acceptance_log.LINES):
        terminalreporter.write_line(acceptance_log.LINES[number])

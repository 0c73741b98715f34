"""Shared pytest hooks: print the acceptance-criteria report after a run."""

import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    for name, module in sys.modules.items():
        if name.rpartition(".")[2] == "test_acceptance":
            lines = getattr(module, "CRITERION_LINES", ())
            if lines:
                terminalreporter.section("acceptance criteria")
                for line in lines:
                    terminalreporter.write_line(line)
            break

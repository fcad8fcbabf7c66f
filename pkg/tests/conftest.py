import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spadsim import load_preset  # noqa: E402
from spadsim.likelihood import build_model  # noqa: E402


@pytest.fixture(scope="session")
def table1():
    return load_preset("table1_resolution_target")


@pytest.fixture(scope="session")
def table2():
    return load_preset("table2_landrover")


@pytest.fixture(scope="session")
def table1_model(table1):
    return build_model(table1.laser, table1.atmosphere, table1.optics, table1.sensor, table1.target)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)

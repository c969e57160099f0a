import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from alphaforge.market import generate_synthetic  # noqa: E402


@pytest.fixture(scope="session")
def market():
    """Corpus-sized synthetic market shared across the session."""
    return generate_synthetic(7, 600, 200, 5)


@pytest.fixture(scope="session")
def small_market():
    return generate_synthetic(3, 300, 30, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.status_lines():
        terminalreporter.write_line(line)

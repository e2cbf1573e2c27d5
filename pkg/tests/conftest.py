import numpy as np
import pytest

import _report
from cataclysm.runner import ScenarioConfig, build_model


@pytest.fixture(scope="session")
def model():
    return build_model(ScenarioConfig())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not _report.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_report.RESULTS):
        terminalreporter.write_line(_report.RESULTS[k])

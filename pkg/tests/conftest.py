import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from chimneysim import AcquisitionGeometry, SolverConfig, SourceWavelet, VelocityModel  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: runs full desk-scale datasets")


@pytest.fixture
def homogeneous():
    """64 x 64 model at 2000 m/s, dx 10 m."""
    return VelocityModel(np.full((64, 64), 2000.0), 10.0)


@pytest.fixture
def small_setup(homogeneous):
    geo = AcquisitionGeometry.surface_line(64, 10.0, 2, 200.0, 16, 30.0, 0.004, 120,
                                           source_depth=50.0, receiver_depth=50.0)
    return homogeneous, geo, SourceWavelet(15.0, 0.004, 120), SolverConfig(boundary_width=30)


# acceptance lines collected by test_acceptance.py, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])

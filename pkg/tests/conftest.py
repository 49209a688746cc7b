import sys

import numpy as np
import pytest

from cpisnr import GeometryConfig, ObjectMask, SourceModel
from cpisnr.slice1d import SliceModel
from cpisnr.speckle import GridSpec, simulate_frames

SRC = SourceModel(0.5e-3, 25e-6, 532e-9)
SLITS = ObjectMask.double_slit(40e-6, 120e-6)


@pytest.fixture(scope="session")
def focused_model():
    """Small focused 1D arrangement-1 model (source 0.5 mm, 40/120 um double slit)."""
    g = GeometryConfig.setup1_magnified(0.1, 0.1, 0.05, 1.0)
    return SliceModel.build(SRC, g, SLITS, None, GridSpec(401, 2e-6), GridSpec(301, 20e-6),
                            master_seed=3, n_frames=2000)


@pytest.fixture(scope="session")
def focused_frames(focused_model):
    m = focused_model
    return simulate_frames(m.speckle, m.geometry, m.obj, None, m.grids)


@pytest.fixture(scope="session")
def defocused_model():
    """Defocused 1D arrangement-1 model with a wide D_a for refocusing."""
    g = GeometryConfig.setup1_magnified(0.1, 0.07, 0.05, 1.0)
    return SliceModel.build(SRC, g, SLITS, None, GridSpec(800, 4e-6), GridSpec(300, 20e-6),
                            master_seed=7, n_frames=2000)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

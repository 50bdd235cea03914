from __future__ import annotations

import numpy as np
import pytest

from gaugeweave import geometry as geo
from gaugeweave import models
from gaugeweave.grid import ParameterGrid


@pytest.fixture(scope="session")
def sphere_bundle():
    """Spin-1/2 bundle on a 64x64 cap band with periodic azimuth."""
    grid = ParameterGrid.from_bounds([0.15, 0.0], [1.45, 2 * np.pi], [64, 64], ("open", "periodic"))
    return geo.build_bundle(models.spin_half_sphere, grid)


@pytest.fixture(scope="session")
def patch_bundle():
    """Spin-1/2 bundle on a fine open patch, h = 0.01."""
    grid = ParameterGrid.from_bounds([0.3, 0.0], [1.3, 1.0], [101, 101], "open")
    return geo.build_bundle(models.spin_half_sphere, grid)


@pytest.fixture(scope="session")
def diag_bundle():
    grid = ParameterGrid.from_bounds([0.5], [2.0], [31])
    return geo.build_bundle(models.diag_two_level, grid)

"""Berry phase of the lower spin-1/2 state around circles of latitude.

The line integral of the sampled connection and the overlap product agree
with each other and with minus half the enclosed solid angle.
"""

from __future__ import annotations

import numpy as np

from gaugeweave import geometry as geo
from gaugeweave import models
from gaugeweave.grid import ParameterGrid, PathContour

grid = ParameterGrid.from_bounds([0.1, 0.0], [np.pi - 0.1, 2 * np.pi], [121, 400],
                                 ("open", "periodic"))
bundle = geo.build_bundle(models.spin_half_sphere, grid)
conn = geo.berry_connection(bundle, 0)

# phases are compared modulo 2 pi
print(f"{'theta':>8} {'line':>12} {'wilson':>12} {'-pi(1-cos)':>12} {'line error':>11}")
for i in (10, 40, 60, 90):
    idx = [(i, j) for j in range(grid.points[1])] + [(i, 0)]
    loop = PathContour.from_indices(grid, idx, closed=True)
    theta = grid.axis(0)[i]
    exact = geo.wrap_phase(-np.pi * (1 - np.cos(theta)))
    line = geo.berry_phase_line(conn, loop)
    print(f"{theta:8.4f} {line:12.6f} {geo.berry_phase_wilson(bundle, 0, loop):12.6f} "
          f"{exact:12.6f} {geo.phase_distance(line, exact):11.2e}")

total, chern = geo.chern_number(
    geo.build_bundle(models.spin_half_sphere,
                     ParameterGrid.from_bounds([0.0, 0.0], [np.pi, 2 * np.pi], [41, 40],
                                               ("open", "periodic"))), 0)
print(f"plaquette flux over the sphere: {total:.12f} ({chern:+.0f} x 2 pi)")

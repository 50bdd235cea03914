"""Split the Berry connection of a spin-1/2 state into self and mutual parts.

A fixed post-selected bra divides the connection into a gauge-dependent
self part and a gauge-invariant mutual part.  A random gauge transformation
shifts only the self part, by minus the gradient of the gauge phase.
"""

from __future__ import annotations

import numpy as np

from gaugeweave import geometry as geo
from gaugeweave import models
from gaugeweave import weakvalue as wv
from gaugeweave.grid import ParameterGrid

rng = np.random.default_rng(11)
grid = ParameterGrid.from_bounds([0.2, 0.0], [1.4, 2 * np.pi], [64, 64], ("open", "periodic"))
bundle = geo.build_bundle(models.spin_half_sphere, grid)
bra = wv.FixedBra(np.array([0.8, 0.6j]))

dec = wv.decompose(bundle, 0, bra)
A = geo.connection_array(bundle, 0)
keep = ~dec.mask
print("closure residual      ", np.max(np.abs(dec.total - A)[keep]))
print("max |Im A_self|       ", np.max(np.abs(dec.a_self.components.imag[keep])))
print("max |Im A_mutual|     ", np.max(np.abs(dec.a_mutual.components.imag[keep])))

G = geo.random_gauge(grid, bundle.band_count, rng)
rep = wv.gauge_covariance_test(bundle, 0, bra, G)
print("self-part shift defect", rep.self_shift_defect)
print("mutual-part change    ", rep.mutual_defect)

curv = wv.curvature_decompose(bundle, 0, bra)
print("max |B_self|          ", np.nanmax(np.abs(curv.b_self.plane(0, 1).values)))

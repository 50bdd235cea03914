"""Drive a spin-1/2 around a cone and watch leakage fall with the speed.

Leakage out of the instantaneous lower state scales with the square of the
angular speed.  For slow driving the geometric phase approaches minus half
the solid angle of the cone.
"""

from __future__ import annotations

import numpy as np

from gaugeweave import adiabatic as ad
from gaugeweave import geometry as geo
from gaugeweave import models

theta = np.pi / 3
print(f"{'omega':>8} {'max leakage':>14}")
for omega in (0.2, 0.1, 0.05, 0.02):
    path = ad.cone_path(theta, omega, 1, 400)
    psi0 = np.linalg.eigh(models.spin_half_sphere(path.samples[0]))[1][:, 0]
    res = ad.evolve_tdse(models.spin_half_sphere, path, psi0, 0.05, band=0)
    print(f"{omega:8.3f} {res.max_leakage:14.3e}")

path = ad.cone_path(theta, 0.005, 1, 2000)
psi0 = np.linalg.eigh(models.spin_half_sphere(path.samples[0]))[1][:, 0]
res = ad.evolve_tdse(models.spin_half_sphere, path, psi0, 0.1, band=0)
gamma = geo.wrap_phase(res.geometric_phase[-1] - res.geometric_phase[0])
print(f"geometric phase {gamma:.5f}, expected {geo.wrap_phase(-np.pi * (1 - np.cos(theta))):.5f}")

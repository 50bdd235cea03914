"""A particle in a small box carried around a thin solenoid.

The Berry phase of the carried state equals the enclosed flux times q / hbar,
whatever the loop shape.  The mutual part of the connection depends only on
the box profile; its transverse component is purely imaginary and diverges
at the nodes of the excited modes.
"""

from __future__ import annotations

import numpy as np

from gaugeweave import aharonov_bohm as ab

states = ab.bound_states_1d(0.6, 1)
well = ab.MovingWell(ab.ProductState((states[0], states[0])), ab.SolenoidConfig(1.5))
for name, loop in (("circle", ab.circle_loop((0, 0), 1.5, 1000)),
                   ("square", ab.square_loop((0, 0), 1.5, 1000)),
                   ("off-axis circle", ab.circle_loop((3, 0), 0.8, 1000))):
    print(f"{name:>16}: loop phase {ab.loop_berry_phase(well, loop):+.6f}")

for mode in (0, 2):
    t = ab.profile_table(mode, 1.0)
    print(f"mode {mode}: max |Re A_mutual| = {t.max_real:.1e}, "
          f"masked windows around x = {[round(c, 4) for _, _, c in t.windows]}")
    for X, v, re, im, masked in list(t.rows())[::256]:
        tail = "masked" if masked else f"{im:+10.4f}"
        print(f"    X={X:+.3f}  v={v:+.4f}  Im A={tail}")

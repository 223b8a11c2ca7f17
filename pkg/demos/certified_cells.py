"""Show why one joint goal serves a whole grid cell.

Samples object poses inside a cell and checks that the cell's certified
end-effector pose stays inside every sampled pose's grasp region, then shows
that a pose just outside the cell is no longer guaranteed.
"""

import numpy as np

from coad.scenario import load_scenario
from coad.transforms import Pose4, cell_index, cell_nominal, certified_goal, tsr_contains, tsr_contains_many

scn = load_scenario("table")
g = scn.grid
print("cell widths (x, y, z, yaw):", np.round(g.widths, 4))

cell = (4, 5, 0, 3)
goal = certified_goal(cell, g, scn.tsr)
nominal = cell_nominal(cell, g)
print("nominal pose of", cell, "=", np.round(tuple(nominal), 4))

rng = np.random.default_rng(0)
lo = np.array([g.lower[0] + cell[0] * g.widths[0], g.lower[1] + cell[1] * g.widths[1], g.lower[2], cell[3] * g.widths[3]])
hi = lo + np.array(g.widths)
hi[2] = g.upper[2]
P = rng.uniform(lo, hi, size=(50_000, 4))
R = np.stack([np.array([[np.cos(a), -np.sin(a), 0], [np.sin(a), np.cos(a), 0], [0, 0, 1]]) for a in P[:, 3]])
inside = tsr_contains_many(R, P[:, :3], goal, scn.tsr)
print(f"{inside.sum()} of {len(P)} sampled object poses accept the certified goal")

far = Pose4(nominal.x + 2.5 * g.widths[0], nominal.y, nominal.z, nominal.psi)
print("a pose 2.5 cell widths away lands in", tuple(cell_index(far, g)),
      "and accepts the goal:", tsr_contains(far.to_transform(), goal, scn.tsr))

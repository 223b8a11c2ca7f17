"""Compare the three adapters on the same cells of the table scenario.

Each library is built from the same seed, so the differences come only from
how a root motion is bent toward a new goal. Takes under a minute.
"""

import numpy as np

from coad.bench import path_length
from coad.library import build_library
from coad.query import query
from coad.scenario import load_scenario
from coad.transforms import cell_nominal

scn = load_scenario("table")
libs = {name: build_library(scn, name, seed=42) for name in ("li", "dmp", "sto")}

for name, (lib, rep) in libs.items():
    print(f"{name:4s} covered {rep.n_covered:4d}  roots {rep.n_roots:3d}  compression {rep.compression:.3f}")

common = sorted(set.intersection(*(set(lib.map) for lib, _ in libs.values())))
rng = np.random.default_rng(0)
print("\ncell                 " + "  ".join(f"{n:>6s}" for n in libs))
for flat in rng.choice(common, 8, replace=False):
    cell = scn.grid.unflat(int(flat))
    pose = cell_nominal(cell, scn.grid)
    lengths = [path_length(query(lib, pose).path) for lib, _ in libs.values()]
    print(f"{str(tuple(cell)):20s} " + "  ".join(f"{v:6.3f}" for v in lengths))

"""Build a library for the shelf scenario, then answer a handful of queries.

Run with ``python3 demos/build_and_query.py``. Takes about ten seconds.
"""

import numpy as np

from coad.bench import sample_queries
from coad.library import build_library, verify_library
from coad.query import query, validate_result
from coad.scenario import load_scenario

scn = load_scenario("shelf")
print(f"grid counts {scn.grid.counts} -> {scn.grid.n_cells} cells")

# Offline: one RRT-Connect plan per root, every other cell is reached by adaptation.
lib, report = build_library(scn, "li", seed=42)
print(f"covered {report.n_covered}, infeasible {report.n_infeasible}, "
      f"roots {report.n_roots}, compression {report.compression:.3f}, {report.wall_time:.1f} s")
print("verify:", "ok" if verify_library(lib, scn).ok else "violations")

# Online: index the pose, fetch the root, adapt it to the stored goal.
for pose in sample_queries(scn, 5, seed=0, covered=set(lib.map)):
    r = query(lib, pose)
    ok = validate_result(scn, lib, pose, r) is None
    print(f"{tuple(round(float(v), 3) for v in pose)} -> cell {tuple(r.cell)}, {len(r.path)} waypoints, "
          f"{r.total_ns / 1e3:.1f} us, valid={ok}")

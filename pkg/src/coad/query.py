"""Online queries: pose to cell, cell to stored entry, entry to adapted path.

A query does no planning, no inverse kinematics and no collision checking.
Every covered cell was certified offline, so the result is trusted as is;
:func:`validate_result` re-checks a returned path for tests and debugging.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .library import LIMIT_TOL, Library
from .robot import fk
from .scenario import Scenario
from .transforms import BOUND_TOL, CellIndex, Pose4, tsr_contains
from .world import ValidityContext

SOLVED = "solved"
UNCOVERED = "uncovered"
OUT_OF_TASK_SPACE = "out_of_task_space"

PATH_FORMAT = "coad-path"
PATH_VERSION = 1


@dataclass(frozen=True, eq=False)
class QueryResult:
    outcome: str
    path: np.ndarray | None
    cell: CellIndex | None
    index_ns: int
    retrieve_ns: int
    adapt_ns: int

    @property
    def solved(self) -> bool:
        return self.outcome == SOLVED

    @property
    def total_ns(self) -> int:
        return self.index_ns + self.retrieve_ns + self.adapt_ns

    def to_dict(self, pose: Pose4 | None = None, adapter: str | None = None) -> dict:
        """JSON-ready form; waypoints are written as plain floats, which round-trip exactly."""
        return {
            "format": PATH_FORMAT,
            "version": PATH_VERSION,
            "outcome": self.outcome,
            "pose": None if pose is None else list(pose),
            "adapter": adapter,
            "cell": None if self.cell is None else list(self.cell),
            "waypoints": None if self.path is None else self.path.tolist(),
            "timings_ns": {"index": self.index_ns, "retrieve": self.retrieve_ns, "adapt": self.adapt_ns},
        }


def _locate(pose: Pose4, grid) -> tuple[CellIndex | None, int]:
    # same arithmetic as transforms.cell_index, inlined so the hot path skips
    # exception handling and numpy scalar conversions
    lower, upper, widths, counts = grid.lower, grid.upper, grid.widths, grid.counts
    idx = [0, 0, 0, 0]
    for d, v in enumerate((pose.x, pose.y, pose.z)):
        if v < lower[d] - BOUND_TOL or v > upper[d] + BOUND_TOL:
            return None, -1
        i = math.floor((v - lower[d]) / widths[d])
        idx[d] = min(max(i, 0), counts[d] - 1)
    i = math.floor(pose.psi / widths[3])
    idx[3] = min(max(i, 0), counts[3] - 1)
    flat = ((idx[0] * counts[1] + idx[1]) * counts[2] + idx[2]) * counts[3] + idx[3]
    return CellIndex(*idx), flat


def query(lib: Library, pose: Pose4) -> QueryResult:
    """Answer one object pose from the library.

    The outcome is ``"solved"`` with a path, ``"uncovered"`` when the cell has
    no entry, or ``"out_of_task_space"``. The caller is responsible for
    loading the library against the matching scenario (see
    :func:`coad.library.load_library`).
    """
    clock = time.perf_counter_ns
    t0 = clock()
    cell, flat = _locate(pose, lib.grid)
    t1 = clock()
    if cell is None:
        return QueryResult(OUT_OF_TASK_SPACE, None, None, t1 - t0, 0, 0)
    entry = lib.map.get(flat)
    if entry is not None:
        root = lib.roots[entry[0]]
    t2 = clock()
    if entry is None:
        return QueryResult(UNCOVERED, None, cell, t1 - t0, t2 - t1, 0)
    path = lib.adapter.adapt(root, entry[1])
    t3 = clock()
    return QueryResult(SOLVED, path, cell, t1 - t0, t2 - t1, t3 - t2)


def validate_result(scn: Scenario, lib: Library, pose: Pose4, result: QueryResult,
                    resolution: float | None = None) -> str | None:
    """Post-hoc check of a solved result against the exact object pose.

    Returns None when the path starts at the library start, respects the
    joint limits, is collision-free with the object at ``pose``, and ends at
    an end-effector pose inside the TSR of ``pose``. Otherwise returns the
    first reason it fails.
    """
    if not result.solved:
        return f"not solved ({result.outcome})"
    model = scn.robot
    path = np.asarray(result.path)
    if path.ndim != 2 or path.shape[1] != model.dof or not np.all(np.isfinite(path)):
        return "malformed path"
    if not np.array_equal(path[0], lib.q_start):
        return "path does not start at q_start"
    if np.any(path < model.lower - LIMIT_TOL) or np.any(path > model.upper + LIMIT_TOL):
        return "joint limits violated"
    res = scn.library.resolution if resolution is None else resolution
    ctx = ValidityContext.exact(scn.env, pose, res)
    if not ctx.checker(model).path_valid(path, res):
        return "collision under the exact object pose"
    if not tsr_contains(pose.to_transform(), fk(model, path[-1]), scn.tsr):
        return "final end-effector pose outside the queried TSR"
    return None

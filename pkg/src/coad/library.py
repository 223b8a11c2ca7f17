"""Offline construction of compressed root-motion libraries and their file format.

A library maps every solvable grid cell to a stored root motion plus a goal
configuration. Building samples an uncovered root cell, plans one path for
it, then tries to reuse that path for nearby cells by adaptation. Every
accepted cell is checked against the object swept over the whole cell, so a
query anywhere inside it needs no further checks.
"""

from __future__ import annotations

import base64
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .adapters import AdaptationError, Adapter, DmpWeights, RawPath, make_adapter
from .adapters.li import LiAdapter
from .planner import PlanningError, plan_with_checker
from .robot import IkOptions, ik, ik_error
from .scenario import Scenario
from .transforms import GridSpec, certified_goal, pose_metric
from .world import CollisionChecker, ValidityContext

FORMAT = "coad-library"
FORMAT_VERSION = 1
LIMIT_TOL = 1e-9


class LibraryError(ValueError):
    """Unreadable, mismatched or otherwise unusable library file."""


@dataclass
class BuildReport:
    n_cells: int
    n_covered: int
    n_roots: int
    n_infeasible: int
    compression: float
    wall_time: float
    coverage: list = field(default_factory=list)

    @staticmethod
    def compression_ratio(n_covered: int, n_roots: int) -> float:
        return (n_covered - n_roots) / n_covered if n_covered else 0.0

    def as_dict(self, with_time: bool = True) -> dict:
        d = {
            "n_cells": self.n_cells,
            "n_covered": self.n_covered,
            "n_roots": self.n_roots,
            "n_infeasible": self.n_infeasible,
            "compression": self.compression,
            "coverage": list(self.coverage),
        }
        if with_time:
            d["wall_time"] = self.wall_time
        return d


@dataclass(eq=False)
class Library:
    adapter_id: str
    adapter_options: dict
    grid: GridSpec
    fingerprint: str
    seed: int
    q_start: np.ndarray
    limits: tuple
    roots: list = field(default_factory=list)
    map: dict = field(default_factory=dict)
    infeasible: set = field(default_factory=set)
    version: int = FORMAT_VERSION

    def __post_init__(self):
        self._adapter = None

    @property
    def adapter(self) -> Adapter:
        if self._adapter is None:
            a = make_adapter(self.adapter_id, **self.adapter_options)
            self._adapter = a.with_limits(*self.limits)
        return self._adapter

    @property
    def n_covered(self) -> int:
        return len(self.map)

    def cell_entry(self, cell) -> tuple[int, np.ndarray] | None:
        """``(root index, q_goal)`` of a cell, or None when it is not covered."""
        return self.map.get(self.grid.flat(cell))

    def report(self, wall_time: float = 0.0) -> BuildReport:
        counts = np.zeros(len(self.roots), dtype=int)
        for r, _ in self.map.values():
            counts[r] += 1
        return BuildReport(
            n_cells=self.grid.n_cells,
            n_covered=self.n_covered,
            n_roots=len(self.roots),
            n_infeasible=len(self.infeasible),
            compression=BuildReport.compression_ratio(self.n_covered, len(self.roots)),
            wall_time=wall_time,
            coverage=counts.tolist(),
        )


# ---------------------------------------------------------------------------
# validity of an adapted path for a cell


def _cell_checker(scn: Scenario, cell) -> CollisionChecker:
    return ValidityContext.swept(scn.env, scn.grid, cell, scn.library.resolution).checker(scn.robot)


def check_adapted(scn: Scenario, adapter: Adapter, root, path, q_goal, checker: CollisionChecker) -> str | None:
    """Reason the adapted path is unacceptable for the checker's cell, or None if it is fine."""
    model = scn.robot
    path = np.asarray(path)
    if path.ndim != 2 or path.shape[1] != model.dof or not np.all(np.isfinite(path)):
        return "malformed path"
    if not np.array_equal(path[0], adapter.q_start(root)):
        return "path does not start at the root start"
    if not np.array_equal(path[-1], q_goal):
        return "path does not end at the goal"
    if np.any(path < model.lower - LIMIT_TOL) or np.any(path > model.upper + LIMIT_TOL):
        return "joint limits violated"
    if isinstance(adapter, LiAdapter) and not adapter.accepts(model, root, q_goal):
        return "continuity check failed"
    if not checker.path_valid(path, scn.library.resolution):
        return "collision"
    return None


def _adapt_checked(scn, adapter, root, q_goal, checker):
    try:
        path = adapter.adapt(root, q_goal)
    except AdaptationError as e:
        return None, str(e)
    return path, check_adapted(scn, adapter, root, path, q_goal, checker)


def _goal_config(scn: Scenario, cell, warm_start, checker: CollisionChecker):
    q = ik(scn.robot, certified_goal(cell, scn.grid, scn.tsr), warm_start)
    if q is None or not checker.config_valid(q):
        return None
    return q


def _build_planner_opts(scn: Scenario):
    # iteration caps only: a wall-clock timeout would make builds machine dependent
    return replace(scn.planner, timeout=float("inf"), max_iterations=scn.library.plan_iterations)


def _plan_root(scn: Scenario, cell, q_goal, checker, seed: int, flat: int):
    if not checker.config_valid(scn.q_start):
        return None
    rng = np.random.default_rng([seed, flat])
    return plan_with_checker(checker, scn.q_start, q_goal, _build_planner_opts(scn), scn.library.resolution, rng)


def _check_start(scn: Scenario):
    static = ValidityContext.static(scn.env, scn.library.resolution).checker(scn.robot)
    if not scn.robot.within_limits(scn.q_start) or not static.config_valid(scn.q_start):
        raise PlanningError("q_start collides with the static environment or violates joint limits")


def _empty_library(scn: Scenario, adapter: Adapter, seed: int) -> Library:
    return Library(
        adapter_id=adapter.name,
        adapter_options=adapter.options_dict(),
        grid=scn.grid,
        fingerprint=scn.fingerprint,
        seed=int(seed),
        q_start=np.array(scn.q_start, dtype=float),
        limits=(scn.robot.lower.copy(), scn.robot.upper.copy()),
    )


def resolve_adapter(scn: Scenario, adapter) -> Adapter:
    """Adapter instance from an id (options taken from the scenario) or an instance."""
    if isinstance(adapter, str):
        adapter = make_adapter(adapter, **scn.adapter_options.get(adapter, {}))
    return adapter.bind(scn.robot)


def build_library(scn: Scenario, adapter, seed: int = 0, q_start=None, progress=None) -> tuple[Library, BuildReport]:
    """Build a compressed library by root sampling and neighbour adaptation.

    Parameters
    ----------
    scn : Scenario
    adapter : str or Adapter
        ``"li"``, ``"dmp"``, ``"sto"`` or an adapter instance.
    seed : int
        Seeds root selection and every planning call.
    q_start : array_like, optional
        Overrides the scenario's start configuration.
    progress : callable, optional
        Called as ``progress(n_done, n_cells)`` after every root.
    """
    t0 = time.perf_counter()
    if q_start is not None:
        scn = replace(scn, q_start=np.asarray(q_start, dtype=float))
    _check_start(scn)
    adapter = resolve_adapter(scn, adapter)
    lib = _empty_library(scn, adapter, seed)
    grid = scn.grid
    n = grid.n_cells
    nominal = grid.nominal_array()
    uncovered = np.ones(n, dtype=bool)
    rng = np.random.default_rng(seed)
    r_scale = scn.library.r_scale
    while uncovered.any():
        pool = np.flatnonzero(uncovered)
        r = int(pool[rng.integers(len(pool))])
        uncovered[r] = False
        cell = grid.unflat(r)
        checker = _cell_checker(scn, cell)
        q_root = _goal_config(scn, cell, scn.q_start, checker)
        path = None if q_root is None else _plan_root(scn, cell, q_root, checker, seed, r)
        if path is None:
            lib.infeasible.add(r)
            continue
        root = adapter.build_root_motion(path)
        _, why = _adapt_checked(scn, adapter, root, q_root, checker)
        if why is not None:
            lib.infeasible.add(r)
            continue
        k = len(lib.roots)
        lib.roots.append(root)
        lib.map[r] = (k, q_root)

        pool = np.flatnonzero(uncovered)
        if len(pool):
            d = pose_metric(nominal[pool], nominal[r], r_scale)
            order = np.argsort(d, kind="stable")[: scn.library.n_neighbor]
            for j in pool[order]:
                j = int(j)
                ncell = grid.unflat(j)
                nchk = _cell_checker(scn, ncell)
                q_n = _goal_config(scn, ncell, q_root, nchk)
                if q_n is None:
                    continue
                _, why = _adapt_checked(scn, adapter, root, q_n, nchk)
                if why is None:
                    lib.map[j] = (k, q_n)
                    uncovered[j] = False
        if progress is not None:
            progress(n - int(uncovered.sum()), n)
    return lib, lib.report(time.perf_counter() - t0)


def build_full_library(scn: Scenario, seed: int = 0, q_start=None, progress=None) -> tuple[Library, BuildReport]:
    """One independently planned root per cell; the uncompressed reference."""
    t0 = time.perf_counter()
    if q_start is not None:
        scn = replace(scn, q_start=np.asarray(q_start, dtype=float))
    _check_start(scn)
    adapter = resolve_adapter(scn, "full")
    lib = _empty_library(scn, adapter, seed)
    grid = scn.grid
    for r in range(grid.n_cells):
        cell = grid.unflat(r)
        checker = _cell_checker(scn, cell)
        q = _goal_config(scn, cell, scn.q_start, checker)
        path = None if q is None else _plan_root(scn, cell, q, checker, seed, r)
        if path is None:
            lib.infeasible.add(r)
        else:
            lib.map[r] = (len(lib.roots), q)
            lib.roots.append(adapter.build_root_motion(path))
        if progress is not None:
            progress(r + 1, grid.n_cells)
    return lib, lib.report(time.perf_counter() - t0)


@dataclass
class VerifyReport:
    n_checked: int
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_library(lib: Library, scn: Scenario, goal_tol: IkOptions = IkOptions()) -> VerifyReport:
    """Re-adapt and re-check every mapped cell against its swept object."""
    check_fingerprint(lib, scn)
    adapter = lib.adapter
    violations = []
    for flat in sorted(lib.map):
        k, q_goal = lib.map[flat]
        cell = scn.grid.unflat(flat)
        if not 0 <= k < len(lib.roots):
            violations.append((cell, f"root index {k} out of range"))
            continue
        root = lib.roots[k]
        pos, rot = ik_error(scn.robot, q_goal, certified_goal(cell, scn.grid, scn.tsr))
        if pos >= goal_tol.pos_tol or rot >= goal_tol.rot_tol:
            violations.append((cell, f"goal configuration misses the certified goal ({pos:.2e} m, {rot:.2e} rad)"))
            continue
        if not np.array_equal(adapter.q_start(root), lib.q_start):
            violations.append((cell, "root does not start at the library start configuration"))
            continue
        _, why = _adapt_checked(scn, adapter, root, q_goal, _cell_checker(scn, cell))
        if why is not None:
            violations.append((cell, why))
    overlap = set(lib.map) & lib.infeasible
    for flat in sorted(overlap):
        violations.append((scn.grid.unflat(flat), "cell both covered and infeasible"))
    return VerifyReport(len(lib.map), violations)


# ---------------------------------------------------------------------------
# persistence


def _enc(a, dtype="<f8") -> dict:
    a = np.ascontiguousarray(a, dtype=dtype)
    return {"dtype": dtype, "shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _dec(d) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype=np.dtype(d["dtype"])).reshape(d["shape"]).astype(float if d["dtype"] == "<f8" else np.int64)


def _enc_root(root) -> dict:
    if isinstance(root, DmpWeights):
        return {"kind": "dmp", "weights": _enc(root.weights), "q_start": _enc(root.q_start), "demo_goal": _enc(root.demo_goal)}
    return {"kind": "raw", "waypoints": _enc(root.waypoints)}


def _dec_root(d):
    if d["kind"] == "dmp":
        return DmpWeights(_dec(d["weights"]), _dec(d["q_start"]), _dec(d["demo_goal"]))
    if d["kind"] == "raw":
        return RawPath(_dec(d["waypoints"]))
    raise LibraryError(f"unknown root motion kind {d['kind']!r}")


def library_to_dict(lib: Library) -> dict:
    cells = sorted(lib.map)
    dof = len(lib.q_start)
    goals = np.array([lib.map[c][1] for c in cells], dtype=float).reshape(len(cells), dof)
    return {
        "format": FORMAT,
        "version": lib.version,
        "adapter": lib.adapter_id,
        "adapter_options": lib.adapter_options,
        "scenario_fingerprint": lib.fingerprint,
        "seed": lib.seed,
        "grid": {
            "lower": list(lib.grid.lower),
            "upper": list(lib.grid.upper),
            "widths": _enc(lib.grid.widths),
            "counts": list(lib.grid.counts),
        },
        "q_start": _enc(lib.q_start),
        "limits": {"lower": _enc(lib.limits[0]), "upper": _enc(lib.limits[1])},
        "roots": [_enc_root(r) for r in lib.roots],
        "cells": {
            "index": _enc(cells, "<i8"),
            "root": _enc([lib.map[c][0] for c in cells], "<i8"),
            "q_goal": _enc(goals),
        },
        "infeasible": _enc(sorted(lib.infeasible), "<i8"),
        "summary": lib.report().as_dict(with_time=False),
    }


def library_from_dict(d: dict) -> Library:
    if d.get("format") != FORMAT:
        raise LibraryError(f"not a library file (format={d.get('format')!r})")
    if d.get("version") != FORMAT_VERSION:
        raise LibraryError(f"library format version {d.get('version')} cannot be read by this build (supports version {FORMAT_VERSION})")
    g = d["grid"]
    grid = GridSpec(tuple(g["lower"]), tuple(g["upper"]), tuple(float(v) for v in _dec(g["widths"])), tuple(g["counts"]))
    cells = _dec(d["cells"]["index"]).tolist()
    roots_idx = _dec(d["cells"]["root"]).tolist()
    goals = _dec(d["cells"]["q_goal"])
    return Library(
        adapter_id=d["adapter"],
        adapter_options=d["adapter_options"],
        grid=grid,
        fingerprint=d["scenario_fingerprint"],
        seed=d["seed"],
        q_start=_dec(d["q_start"]),
        limits=(_dec(d["limits"]["lower"]), _dec(d["limits"]["upper"])),
        roots=[_dec_root(r) for r in d["roots"]],
        map={int(c): (int(k), goals[i].copy()) for i, (c, k) in enumerate(zip(cells, roots_idx))},
        infeasible=set(int(c) for c in _dec(d["infeasible"]).tolist()),
    )


def library_bytes(lib: Library) -> bytes:
    return json.dumps(library_to_dict(lib), sort_keys=True, indent=1).encode() + b"\n"


def save_library(lib: Library, path) -> None:
    Path(path).write_bytes(library_bytes(lib))


def check_fingerprint(lib: Library, scn: Scenario) -> None:
    if lib.fingerprint != scn.fingerprint:
        raise LibraryError(
            f"library was built for scenario {lib.fingerprint[:12]}, not {scn.fingerprint[:12]} ({scn.name})"
        )


def load_library(path, scenario: Scenario | None = None) -> Library:
    """Read a library file; with ``scenario`` given, also require a matching fingerprint."""
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise LibraryError(f"{path}: not valid JSON ({e})") from None
    lib = library_from_dict(d)
    if scenario is not None:
        check_fingerprint(lib, scenario)
    return lib

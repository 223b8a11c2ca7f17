"""Baselines and the benchmark harness.

Two baselines are compared with library queries on one shared set of object
poses:

* ``rrt``: inverse kinematics from ``q_start`` followed by raw RRT-Connect
  under the exact object pose, from scratch for every query.
* ``naive``: a library of randomly sampled (pose, path) pairs without a grid.
  A query takes the five nearest stored poses, repairs colliding stretches
  with RRT-Connect and rewires the end of the path to the new goal.
"""

from __future__ import annotations

import os
import platform
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .adapters import RawPath, li_adapt
from .library import Library
from .planner import PlannerOpts, path_length, rrt_connect, shortcut
from .query import query, validate_result
from .robot import fk, ik
from .scenario import Scenario
from .transforms import Pose4, TWO_PI, cell_index, pose_metric, tsr_contains
from .world import ValidityContext

__all__ = [
    "BenchReport",
    "MethodStats",
    "NaiveLibrary",
    "baseline_naive_library",
    "baseline_rrt",
    "naive_query",
    "path_length",
    "run_bench",
    "sample_pose",
    "sample_queries",
]

N_CANDIDATES = 5
REPAIR_NOTE = "invalid stretches are repaired between consecutive valid waypoints of the stored path"
# stream ids that keep the query set, baselines and naive build independent of each other
_QUERY_STREAM, _NAIVE_BUILD_STREAM, _RRT_STREAM, _NAIVE_QUERY_STREAM = 0, 1, 2, 3


def sample_pose(rng: np.random.Generator, scn: Scenario) -> Pose4:
    """Uniform object pose over the task space, yaw uniform on the circle."""
    g = scn.grid
    xyz = [rng.uniform(lo, hi) if hi > lo else lo for lo, hi in zip(g.lower, g.upper)]
    return Pose4(*xyz, rng.uniform(0.0, TWO_PI))


def sample_queries(scn: Scenario, n: int, seed: int, covered=None, max_tries: int = 1000) -> list[Pose4]:
    """``n`` uniform poses; with ``covered`` (a set of flat cell ids) rejection-sample inside those cells."""
    rng = np.random.default_rng([seed, _QUERY_STREAM])
    if covered is not None and n > 0 and not covered:
        raise ValueError("no covered cells to sample queries from")
    out = []
    tries = 0
    while len(out) < n:
        tries += 1
        if tries > max_tries * max(n, 1):
            raise RuntimeError("rejection sampling of covered cells did not terminate")
        p = sample_pose(rng, scn)
        if covered is None or scn.grid.flat(cell_index(p, scn.grid)) in covered:
            out.append(p)
    return out


def _goal_target(scn: Scenario, pose: Pose4):
    return pose.to_transform() @ scn.tsr.grasp_offset


def _exact_checker(scn: Scenario, pose: Pose4):
    return ValidityContext.exact(scn.env, pose, scn.library.resolution).checker(scn.robot)


def _valid_goal(scn, pose, warm_start, checker):
    q = ik(scn.robot, _goal_target(scn, pose), warm_start)
    if q is None or not checker.config_valid(q):
        return None
    return q


def _deadline(opts: PlannerOpts):
    return time.monotonic() + opts.timeout if np.isfinite(opts.timeout) else None


def baseline_rrt(scn: Scenario, pose: Pose4, opts: PlannerOpts | None = None, seed: int = 0):
    """Solve one query from scratch: IK warm-started at ``q_start``, then raw RRT-Connect.

    The path is returned without shortcutting or resampling. Returns None if
    IK fails, the goal or start collides, or the planner runs out of time.
    """
    opts = opts or scn.planner
    checker = _exact_checker(scn, pose)
    if not checker.config_valid(scn.q_start):
        return None
    q_goal = _valid_goal(scn, pose, scn.q_start, checker)
    if q_goal is None:
        return None
    rng = np.random.default_rng(seed)
    return rrt_connect(checker, scn.q_start, q_goal, opts, rng, scn.library.resolution, _deadline(opts))


@dataclass(eq=False)
class NaiveLibrary:
    scenario: Scenario
    poses: np.ndarray
    paths: list
    seed: int
    opts: PlannerOpts
    n_attempts: int = 0

    @property
    def size(self) -> int:
        return len(self.paths)


def _bridge(checker, qa, qb, opts, rng, resolution, deadline):
    raw = rrt_connect(checker, qa, qb, opts, rng, resolution, deadline)
    if raw is None:
        return None
    return shortcut(raw, checker, resolution, opts.shortcut_rounds, rng)


def baseline_naive_library(scn: Scenario, N: int, seed: int = 0, opts: PlannerOpts | None = None,
                           max_attempts: int | None = None, progress=None) -> NaiveLibrary:
    """Plan paths for ``N`` uniformly sampled object poses.

    Poses whose goal is unreachable or whose planning fails are redrawn, up
    to ``max_attempts`` draws in total (default ``50 * N``). Planning uses
    the scenario's iteration cap for library builds rather than a timeout.
    """
    if opts is None:
        opts = replace(scn.planner, timeout=float("inf"), max_iterations=scn.library.plan_iterations)
    max_attempts = 50 * N if max_attempts is None else max_attempts
    rng = np.random.default_rng([seed, _NAIVE_BUILD_STREAM])
    res = scn.library.resolution
    poses, paths = [], []
    attempts = 0
    while len(paths) < N and attempts < max_attempts:
        attempts += 1
        pose = sample_pose(rng, scn)
        checker = _exact_checker(scn, pose)
        if not checker.config_valid(scn.q_start):
            continue
        q_goal = _valid_goal(scn, pose, scn.q_start, checker)
        if q_goal is None:
            continue
        path = _bridge(checker, scn.q_start, q_goal, opts, rng, res, None)
        if path is None:
            continue
        poses.append(pose.as_array())
        paths.append(path)
        if progress is not None:
            progress(len(paths), N)
    # queries plan with the scenario's own options, timeout included
    return NaiveLibrary(scn, np.array(poses).reshape(-1, 4), paths, seed, scn.planner, attempts)


def _repair(path, checker, opts, rng, resolution, deadline):
    """Replace every colliding stretch of ``path`` by an RRT-Connect bridge."""
    if not checker.config_valid(path[0]):
        return None
    valid = checker.valid(path)
    out = [path[0]]
    i, n = 0, len(path)
    while i < n - 1:
        if checker.edge_valid(path[i], path[i + 1], resolution):
            out.append(path[i + 1])
            i += 1
            continue
        nxt = np.flatnonzero(valid[i + 1:])
        if len(nxt) == 0:
            # nothing valid left: let the rewiring step reach the goal from here
            break
        j = i + 1 + int(nxt[0])
        seg = _bridge(checker, path[i], path[j], opts, rng, resolution, deadline)
        if seg is None:
            return None
        out.extend(seg[1:])
        i = j
    return np.array(out)


def _rewire(scn, path, pose, checker, opts, rng, deadline):
    model, res = scn.robot, scn.library.resolution
    if tsr_contains(pose.to_transform(), fk(model, path[-1]), scn.tsr):
        return path
    q_goal = _valid_goal(scn, pose, path[-1], checker)
    if q_goal is None:
        return None
    out = li_adapt(RawPath(path), q_goal)
    if checker.path_valid(out[len(path) - 1:], res):
        return out
    seg = _bridge(checker, path[-1], q_goal, opts, rng, res, deadline)
    if seg is None:
        return None
    return np.concatenate([path, seg[1:]])


def naive_query(nl: NaiveLibrary, pose: Pose4, seed: int = 0):
    """Retrieve, repair and rewire the nearest stored paths; the first success wins.

    Returns a path or None when all candidates fail.
    """
    if nl.size == 0:
        return None
    scn = nl.scenario
    opts = nl.opts
    rng = np.random.default_rng(seed)
    deadline = _deadline(opts)
    d = pose_metric(nl.poses, pose.as_array(), scn.library.r_scale)
    checker = _exact_checker(scn, pose)
    for k in np.argsort(d, kind="stable")[:N_CANDIDATES]:
        path = _repair(nl.paths[int(k)], checker, opts, rng, scn.library.resolution, deadline)
        if path is None:
            continue
        path = _rewire(scn, path, pose, checker, opts, rng, deadline)
        if path is not None:
            return path
    return None


@dataclass
class MethodStats:
    n_queries: int
    n_solved: int
    success_rate: float | None
    length_mean: float | None
    length_std: float | None
    time_ms: dict
    library_size: int
    compression: float | None = None
    uncovered_fraction: float | None = None
    n_invalid: int | None = None

    def as_dict(self, with_timings: bool = True) -> dict:
        d = dict(self.__dict__)
        if not with_timings:
            d.pop("time_ms")
        return d


@dataclass
class BenchReport:
    methods: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_dict(self, with_timings: bool = True) -> dict:
        meta = dict(self.metadata)
        if not with_timings:
            meta.pop("timings", None)
        return {
            "format": "coad-bench",
            "version": 1,
            "methods": {k: v.as_dict(with_timings) for k, v in self.methods.items()},
            "metadata": meta,
        }


def _stats(lengths, times_s, n, size, **extra) -> MethodStats:
    lengths = np.asarray(lengths, dtype=float)
    t_ms = np.asarray(times_s, dtype=float) * 1e3
    pct = {f"p{p}": float(np.percentile(t_ms, p)) for p in (50, 95, 99)} if n else {}
    return MethodStats(
        n_queries=n,
        n_solved=len(lengths),
        success_rate=len(lengths) / n if n else None,
        length_mean=float(lengths.mean()) if len(lengths) else None,
        length_std=float(lengths.std()) if len(lengths) else None,
        time_ms=pct,
        library_size=size,
        **extra,
    )


def _labels(libraries) -> dict:
    if isinstance(libraries, dict):
        return dict(libraries)
    out = {}
    for lib in libraries:
        name = f"coad-{lib.adapter_id}"
        k = 2
        while name in out:
            name = f"coad-{lib.adapter_id}-{k}"
            k += 1
        out[name] = lib
    return out


def run_bench(scn: Scenario, libraries=(), baselines=("rrt", "naive"), n_queries: int = 1000, seed: int = 0,
              covered_only: bool = False, naive_size: int | None = None, validate: bool = False,
              progress=None) -> BenchReport:
    """Evaluate libraries and baselines on one seeded query set.

    Parameters
    ----------
    libraries : dict or sequence of Library
        Labelled libraries; a sequence is labelled ``coad-<adapter>``.
    baselines : sequence of {"rrt", "naive"}
    covered_only : bool
        Sample queries only inside cells covered by every library.
    naive_size : int, optional
        Paths stored by the naive baseline. Defaults to the largest library's
        covered-cell count, the size a full per-cell library would need.
    validate : bool
        Re-check every returned path against the exact pose; failures are
        counted as unsolved and reported in ``n_invalid``.
    progress : callable, optional
        ``progress(method, n_done, n_total)``.
    """
    libs = _labels(libraries)
    for b in baselines:
        if b not in ("rrt", "naive"):
            raise ValueError(f"unknown baseline {b!r}")
    covered = None
    if covered_only:
        if not libs:
            raise ValueError("covered_only needs at least one library")
        covered = set.intersection(*(set(lib.map) for lib in libs.values()))
    poses = sample_queries(scn, n_queries, seed, covered)
    report = BenchReport()
    timings = {}

    def tick(name, i):
        if progress is not None:
            progress(name, i + 1, len(poses))

    for name, lib in libs.items():
        lengths, times, uncovered, invalid = [], [], 0, 0
        for i, pose in enumerate(poses):
            t0 = time.perf_counter()
            res = query(lib, pose)
            times.append(time.perf_counter() - t0)
            if res.solved:
                if validate and validate_result(scn, lib, pose, res) is not None:
                    invalid += 1
                else:
                    lengths.append(path_length(res.path))
            elif res.outcome == "uncovered":
                uncovered += 1
            tick(name, i)
        report.methods[name] = _stats(
            lengths, times, len(poses), len(lib.roots),
            compression=lib.report().compression,
            uncovered_fraction=uncovered / len(poses) if poses else None,
            n_invalid=invalid if validate else None,
        )

    if "rrt" in baselines:
        lengths, times = [], []
        for i, pose in enumerate(poses):
            t0 = time.perf_counter()
            path = baseline_rrt(scn, pose, seed=_seed(seed, _RRT_STREAM, i))
            times.append(time.perf_counter() - t0)
            if path is not None:
                lengths.append(path_length(path))
            tick("rrt", i)
        report.methods["rrt"] = _stats(lengths, times, len(poses), 0)

    if "naive" in baselines:
        if naive_size is None:
            naive_size = max((lib.n_covered for lib in libs.values()), default=0)
        t0 = time.perf_counter()
        nl = baseline_naive_library(scn, naive_size, seed)
        timings["naive_build_s"] = time.perf_counter() - t0
        lengths, times = [], []
        for i, pose in enumerate(poses):
            t0 = time.perf_counter()
            path = naive_query(nl, pose, seed=_seed(seed, _NAIVE_QUERY_STREAM, i))
            times.append(time.perf_counter() - t0)
            if path is not None:
                lengths.append(path_length(path))
            tick("naive", i)
        report.methods["naive"] = _stats(lengths, times, len(poses), nl.size)

    report.metadata = {
        "scenario": scn.name,
        "scenario_fingerprint": scn.fingerprint,
        "seed": seed,
        "n_queries": len(poses),
        "covered_only": covered_only,
        "library_seeds": {k: lib.seed for k, lib in libs.items()},
        "naive_size": naive_size if "naive" in baselines else None,
        "naive_repair": REPAIR_NOTE,
        "rrt_timeout_s": scn.planner.timeout,
        "machine": f"{platform.machine()} {platform.system()} cpus={os.cpu_count()} python={platform.python_version()}",
        "timings": timings,
    }
    return report


def _seed(seed: int, stream: int, i: int) -> int:
    # one integer per query so single queries can be replayed in isolation
    return int(np.random.SeedSequence([seed, stream, i]).generate_state(1)[0])

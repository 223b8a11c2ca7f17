"""RRT-Connect with random shortcutting and arc-length resampling."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .world import CollisionChecker

PATH_RESOLUTION = 200


@dataclass(frozen=True)
class PlannerOpts:
    step: float = 0.1
    max_iterations: int = 50_000
    timeout: float = 3.0
    shortcut_rounds: int = 200
    seed: int = 0
    resolution: int = PATH_RESOLUTION

    def __post_init__(self):
        if not (self.step > 0 and self.max_iterations > 0 and self.timeout > 0 and self.shortcut_rounds >= 0):
            raise ValueError(f"invalid planner options {self}")


class PlanningError(ValueError):
    """Raised for caller errors such as an invalid start configuration."""


def path_length(path) -> float:
    """Joint-space length ``sum ||q_{i+1} - q_i||``."""
    path = np.asarray(path, dtype=float)
    if len(path) < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.diff(path, axis=0), axis=1)))


def resample(path, T: int = PATH_RESOLUTION) -> np.ndarray:
    """Arc-length-uniform linear resampling to exactly ``T`` waypoints; endpoints are kept bit-exact."""
    path = np.asarray(path, dtype=float)
    if T < 2:
        raise ValueError("resampling needs at least two waypoints")
    if len(path) == 1:
        return np.repeat(path, T, axis=0)
    seg = np.linalg.norm(np.diff(path, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    if total <= 0.0:
        return np.repeat(path[:1], T, axis=0)
    targets = np.linspace(0.0, total, T)
    idx = np.clip(np.searchsorted(s, targets, side="right") - 1, 0, len(seg) - 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(seg[idx] > 0, (targets - s[idx]) / seg[idx], 0.0)
    frac = np.clip(frac, 0.0, 1.0)[:, None]
    out = (1.0 - frac) * path[idx] + frac * path[idx + 1]
    out[0] = path[0]
    out[-1] = path[-1]
    return out


class _Tree:
    def __init__(self, root: np.ndarray, capacity: int = 1024):
        self.nodes = np.empty((capacity, root.size))
        self.parent = np.empty(capacity, dtype=np.int64)
        self.nodes[0] = root
        self.parent[0] = -1
        self.size = 1

    def add(self, q, parent: int) -> int:
        if self.size == len(self.nodes):
            self.nodes = np.concatenate([self.nodes, np.empty_like(self.nodes)])
            self.parent = np.concatenate([self.parent, np.empty_like(self.parent)])
        self.nodes[self.size] = q
        self.parent[self.size] = parent
        self.size += 1
        return self.size - 1

    def nearest(self, q) -> int:
        d = self.nodes[: self.size] - q
        return int(np.argmin(np.einsum("ij,ij->i", d, d)))

    def branch(self, i: int) -> list:
        out = []
        while i >= 0:
            out.append(self.nodes[i].copy())
            i = int(self.parent[i])
        return out


_TRAPPED, _ADVANCED, _REACHED = 0, 1, 2


def _extend(tree: _Tree, q, checker: CollisionChecker, step: float, resolution: float):
    i = tree.nearest(q)
    qn = tree.nodes[i]
    d = q - qn
    dist = float(np.sqrt(d @ d))
    if dist <= step:
        q_new, status = q, _REACHED
    else:
        q_new, status = qn + d * (step / dist), _ADVANCED
    if not checker.edge_valid(qn, q_new, resolution):
        return _TRAPPED, -1
    return status, tree.add(q_new, i)


def _connect(tree: _Tree, q, checker, step, resolution):
    status, j = _ADVANCED, -1
    while status == _ADVANCED:
        status, k = _extend(tree, q, checker, step, resolution)
        if status != _TRAPPED:
            j = k
    return status, j


def rrt_connect(checker: CollisionChecker, q_start, q_goal, opts: PlannerOpts, rng: np.random.Generator,
                resolution: float, deadline: float | None = None):
    """Raw RRT-Connect waypoint list from ``q_start`` to ``q_goal``, or None."""
    model = checker.model
    lo, hi = model.lower, model.upper
    q_start = np.asarray(q_start, dtype=float)
    q_goal = np.asarray(q_goal, dtype=float)
    if np.array_equal(q_start, q_goal):
        return np.stack([q_start, q_goal])
    ta, tb = _Tree(q_start), _Tree(q_goal)
    a_is_start = True
    for it in range(opts.max_iterations):
        if deadline is not None and (it & 15) == 0 and time.monotonic() > deadline:
            return None
        q_rand = rng.uniform(lo, hi)
        status, ia = _extend(ta, q_rand, checker, opts.step, resolution)
        if status != _TRAPPED:
            q_new = ta.nodes[ia]
            status_b, ib = _connect(tb, q_new, checker, opts.step, resolution)
            if status_b == _REACHED:
                pa = ta.branch(ia)[::-1]
                pb = tb.branch(ib)[1:]
                path = np.array(pa + pb)
                return path if a_is_start else path[::-1].copy()
        ta, tb = tb, ta
        a_is_start = not a_is_start
    return None


def shortcut(path, checker: CollisionChecker, resolution: float, rounds: int, rng: np.random.Generator) -> np.ndarray:
    """Random-pair shortcutting; a segment is replaced only by a valid straight edge."""
    path = np.asarray(path, dtype=float)
    pts = [p for p in path]
    for _ in range(rounds):
        n = len(pts)
        if n < 3:
            break
        i, j = sorted(rng.choice(n, size=2, replace=False))
        if j - i < 2:
            continue
        if checker.edge_valid(pts[i], pts[j], resolution):
            pts = pts[: i + 1] + pts[j:]
    return np.array(pts)


def plan(model, env, ctx, q_start, q_goal, opts: PlannerOpts | None = None):
    """Plan from ``q_start`` to ``q_goal`` under a validity context; see :func:`plan_with_checker`."""
    opts = opts or PlannerOpts()
    return plan_with_checker(ctx.checker(model), q_start, q_goal, opts, ctx.resolution)


def plan_with_checker(checker: CollisionChecker, q_start, q_goal, opts: PlannerOpts, resolution: float,
                      rng: np.random.Generator | None = None, max_attempts: int = 20):
    """Plan, shortcut and resample a path to ``opts.resolution`` waypoints.

    Returns None when no path was found within the iteration cap or timeout.
    Raises :class:`PlanningError` if ``q_start`` itself is invalid.
    """
    model = checker.model
    q_start = np.asarray(q_start, dtype=float)
    q_goal = np.asarray(q_goal, dtype=float)
    if not model.within_limits(q_start) or not checker.config_valid(q_start):
        raise PlanningError("start configuration is invalid")
    if not model.within_limits(q_goal) or not checker.config_valid(q_goal):
        return None
    rng = rng if rng is not None else np.random.default_rng(opts.seed)
    deadline = time.monotonic() + opts.timeout if np.isfinite(opts.timeout) else None
    for _ in range(max_attempts):
        raw = rrt_connect(checker, q_start, q_goal, opts, rng, resolution, deadline)
        if raw is None:
            return None
        smooth = shortcut(raw, checker, resolution, opts.shortcut_rounds, rng)
        out = resample(smooth, opts.resolution)
        # resampling cuts corners; accept only if the final polyline is still valid
        if checker.path_valid(out, resolution):
            return out
        if deadline is not None and time.monotonic() > deadline:
            return None
    return None

"""Environment geometry, object-dependent free space and swept-cell validity.

Robot links are capsules. Obstacles are spheres, capsules or boxes (axis
aligned in their own frame). All distance kernels are closed form and
vectorised over a batch of configurations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .robot import RobotModel, link_frames
from .transforms import CellIndex, GridSpec, Pose4, Transform, cell_nominal

DEFAULT_RESOLUTION = 0.02
_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class Primitive:
    """Sphere (``points = [center]``), capsule (``[a, b]``) or box (``[min, max]``) in ``frame``."""

    kind: str
    points: np.ndarray
    radius: float = 0.0
    frame: Transform = field(default_factory=Transform)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "points", pts)
        if self.kind == "sphere":
            ok = len(pts) == 1 and self.radius > 0
        elif self.kind == "capsule":
            ok = len(pts) == 2 and self.radius > 0
        elif self.kind == "aabb":
            ok = len(pts) == 2 and bool(np.all(pts[0] < pts[1]))
        else:
            raise ValueError(f"unknown primitive kind {self.kind!r}")
        if not ok:
            raise ValueError(f"invalid {self.kind} parameters: points={pts.tolist()}, radius={self.radius}")

    @classmethod
    def sphere(cls, center, radius, frame=None):
        return cls("sphere", [center], radius, frame or Transform())

    @classmethod
    def capsule(cls, a, b, radius, frame=None):
        return cls("capsule", [a, b], radius, frame or Transform())

    @classmethod
    def aabb(cls, lo, hi, frame=None):
        return cls("aabb", [lo, hi], 0.0, frame or Transform())

    def posed(self, T: Transform) -> "Primitive":
        """The same primitive expressed in the parent frame of ``T``."""
        return Primitive(self.kind, self.points, self.radius, T @ self.frame)

    def world_points(self) -> np.ndarray:
        return self.frame.apply(self.points)


@dataclass(eq=False)
class Environment:
    static_obstacles: list[Primitive]
    object_shape: list[Primitive]

    def __post_init__(self):
        if not self.object_shape:
            raise ValueError("the target object needs at least one primitive")


# ---------------------------------------------------------------------------
# distance kernels


def _seg_point_dist(a, b, p):
    """Distance from segments ``a-b`` to points ``p`` (broadcast over leading axes)."""
    d = b - a
    dd = np.sum(d * d, axis=-1)
    t = np.sum((p - a) * d, axis=-1) / np.maximum(dd, _EPS)
    t = np.clip(t, 0.0, 1.0)
    c = a + t[..., None] * d
    return np.linalg.norm(p - c, axis=-1)


def _seg_seg_dist(p1, q1, p2, q2):
    """Closest distance between segment pairs (Ericson, vectorised)."""
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = np.sum(d1 * d1, axis=-1)
    e = np.sum(d2 * d2, axis=-1)
    f = np.sum(d2 * r, axis=-1)
    c = np.sum(d1 * r, axis=-1)
    b = np.sum(d1 * d2, axis=-1)
    a_s = np.maximum(a, _EPS)
    e_s = np.maximum(e, _EPS)
    denom = a * e - b * b
    s = np.where(denom > _EPS, np.clip((b * f - c * e) / np.where(denom > _EPS, denom, 1.0), 0.0, 1.0), 0.0)
    t = (b * s + f) / e_s
    s = np.where(t < 0.0, np.clip(-c / a_s, 0.0, 1.0), np.where(t > 1.0, np.clip((b - c) / a_s, 0.0, 1.0), s))
    t = np.clip(t, 0.0, 1.0)
    # degenerate segments
    s = np.where(a <= _EPS, 0.0, s)
    t = np.where(a <= _EPS, np.clip(f / e_s, 0.0, 1.0), t)
    t = np.where(e <= _EPS, 0.0, t)
    s = np.where((e <= _EPS) & (a > _EPS), np.clip(-c / a_s, 0.0, 1.0), s)
    c1 = p1 + s[..., None] * d1
    c2 = p2 + t[..., None] * d2
    return np.linalg.norm(c1 - c2, axis=-1)


def _point_box_sqdist(p, lo, hi):
    excess = p - np.clip(p, lo, hi)
    return np.sum(excess * excess, axis=-1)


def _seg_box_dist(a, b, lo, hi):
    """Exact distance from segments to an axis-aligned box.

    The squared distance along the segment is a convex piecewise quadratic in
    the segment parameter; breakpoints are where a coordinate crosses a face
    plane. The minimum of each piece is its clipped stationary point.
    """
    d = b - a
    with np.errstate(divide="ignore", invalid="ignore"):
        t_lo = (lo - a) / d
        t_hi = (hi - a) / d
    bps = np.concatenate([t_lo, t_hi], axis=-1)
    bps = np.where(np.isfinite(bps), np.clip(bps, 0.0, 1.0), 0.0)
    shape = a.shape[:-1]
    knots = np.concatenate([np.zeros(shape + (1,)), np.ones(shape + (1,)), bps], axis=-1)
    knots.sort(axis=-1)
    t0, t1 = knots[..., :-1], knots[..., 1:]
    mid = 0.5 * (t0 + t1)
    pm = a[..., None, :] + mid[..., None] * d[..., None, :]
    below = pm < lo
    above = pm > hi
    bound = np.where(below, lo, hi)
    active = below | above
    dk = np.where(active, d[..., None, :], 0.0)
    num = -np.sum(dk * (a[..., None, :] - bound), axis=-1)
    den = np.sum(dk * dk, axis=-1)
    ts = np.where(den > _EPS, num / np.where(den > _EPS, den, 1.0), mid)
    ts = np.clip(ts, t0, t1)
    p = a[..., None, :] + ts[..., None] * d[..., None, :]
    return np.sqrt(np.min(_point_box_sqdist(p, lo, hi), axis=-1))


# ---------------------------------------------------------------------------
# collision checking


class CollisionChecker:
    """Batched validity of configurations against a fixed set of world-frame obstacles."""

    def __init__(self, model: RobotModel, obstacles: Sequence[Primitive]):
        self.model = model
        li, a, b, r = [], [], [], []
        for i, caps in enumerate(model.links):
            for c in caps:
                li.append(i)
                a.append(c.a)
                b.append(c.b)
                r.append(c.radius)
        self._link = np.array(li, dtype=int)
        self._la = np.array(a, dtype=float).reshape(-1, 3)
        self._lb = np.array(b, dtype=float).reshape(-1, 3)
        self._lr = np.array(r, dtype=float)
        pairs = []
        for i, j in model.self_collision_pairs():
            for ki in np.flatnonzero(self._link == i):
                for kj in np.flatnonzero(self._link == j):
                    pairs.append((ki, kj))
        self._pairs = np.array(pairs, dtype=int).reshape(-1, 2)

        sc, sr, ca, cb, cr, boxes = [], [], [], [], [], []
        for p in obstacles:
            if p.kind == "sphere":
                sc.append(p.world_points()[0])
                sr.append(p.radius)
            elif p.kind == "capsule":
                w = p.world_points()
                ca.append(w[0])
                cb.append(w[1])
                cr.append(p.radius)
            else:
                inv = p.frame.inverse()
                boxes.append((inv.rotation, inv.translation, p.points[0], p.points[1]))
        self._sc = np.array(sc, dtype=float).reshape(-1, 3)
        self._sr = np.array(sr, dtype=float)
        self._ca = np.array(ca, dtype=float).reshape(-1, 3)
        self._cb = np.array(cb, dtype=float).reshape(-1, 3)
        self._cr = np.array(cr, dtype=float)
        self._boxes = boxes
        self._kargs = (
            np.ascontiguousarray(model._origins),
            np.ascontiguousarray(model._axes),
            self._link,
            self._la,
            self._lb,
            self._lr,
            self._sc,
            self._sr,
            self._ca,
            self._cb,
            self._cr,
            np.array([b[0] for b in boxes], dtype=float).reshape(-1, 3, 3),
            np.array([b[1] for b in boxes], dtype=float).reshape(-1, 3),
            np.array([b[2] for b in boxes], dtype=float).reshape(-1, 3),
            np.array([b[3] for b in boxes], dtype=float).reshape(-1, 3),
            self._pairs,
        )

    def link_segments(self, Q: np.ndarray):
        """World endpoints ``(N, L, 3)`` of every link capsule."""
        frames, _ = link_frames(self.model, Q)
        F = frames[:, self._link]
        R, t = F[..., :3, :3], F[..., :3, 3]
        A = np.einsum("nlij,lj->nli", R, self._la) + t
        B = np.einsum("nlij,lj->nli", R, self._lb) + t
        return A, B

    def _batch(self, Q) -> np.ndarray:
        return np.ascontiguousarray(np.asarray(Q, dtype=float).reshape(-1, self.model.dof))

    def clearance(self, Q: np.ndarray) -> np.ndarray:
        """Smallest signed distance between robot and obstacles/itself, ``(N,)``."""
        Q = self._batch(Q)
        if len(self._lr) == 0:
            return np.full(len(Q), np.inf)
        return _kernels.clearance_batch(Q, *self._kargs)

    def first_invalid(self, Q: np.ndarray) -> int:
        """Index of the first configuration in ``Q`` that is in collision, or -1."""
        Q = self._batch(Q)
        if len(self._lr) == 0:
            return -1
        return int(_kernels.first_invalid(Q, *self._kargs))

    def clearance_reference(self, Q: np.ndarray) -> np.ndarray:
        """Pure-numpy evaluation of :meth:`clearance`, kept as an independent cross-check."""
        Q = np.asarray(Q, dtype=float).reshape(-1, self.model.dof)
        N = Q.shape[0]
        out = np.full(N, np.inf)
        if len(self._lr) == 0:
            return out
        A, B = self.link_segments(Q)
        lr = self._lr
        if len(self._sr):
            d = _seg_point_dist(A[:, :, None], B[:, :, None], self._sc[None, None]) - lr[None, :, None] - self._sr
            out = np.minimum(out, d.reshape(N, -1).min(axis=1))
        if len(self._cr):
            d = _seg_seg_dist(A[:, :, None], B[:, :, None], self._ca[None, None], self._cb[None, None])
            d = d - lr[None, :, None] - self._cr
            out = np.minimum(out, d.reshape(N, -1).min(axis=1))
        for R, t, lo, hi in self._boxes:
            Ab = A @ R.T + t
            Bb = B @ R.T + t
            d = _seg_box_dist(Ab, Bb, lo, hi) - lr
            out = np.minimum(out, d.min(axis=1))
        if len(self._pairs):
            i, j = self._pairs[:, 0], self._pairs[:, 1]
            d = _seg_seg_dist(A[:, i], B[:, i], A[:, j], B[:, j]) - lr[i] - lr[j]
            out = np.minimum(out, d.min(axis=1))
        return out

    def valid(self, Q: np.ndarray) -> np.ndarray:
        return self.clearance(Q) > 0.0

    def config_valid(self, q) -> bool:
        return self.first_invalid(q) < 0

    def path_valid(self, path: np.ndarray, resolution: float) -> bool:
        """All waypoints and interpolated edge points of ``path`` are valid."""
        path = self._batch(path)
        if len(self._lr) == 0:
            return True
        return _kernels.path_first_invalid(path, float(resolution), *self._kargs) < 0

    def edge_valid(self, qa, qb, resolution: float) -> bool:
        return self.path_valid(np.stack([qa, qb]), resolution)


def edge_subdivisions(qa, qb, resolution: float):
    """Power-of-two segment count so that every joint step is <= resolution.

    Powers of two make sampled points nest when the resolution is refined and
    keep ``i / k`` exact, so an edge checks identically in both directions.
    """
    m = np.max(np.abs(np.asarray(qb) - np.asarray(qa)), axis=-1)
    ratio = np.maximum(m / resolution, 1.0)
    return (2 ** np.ceil(np.log2(ratio) - 1e-12)).astype(np.int64)


def densify(path: np.ndarray, resolution: float) -> np.ndarray:
    """Waypoints plus interpolated points so each joint step is <= resolution."""
    path = np.asarray(path, dtype=float)
    if path.ndim == 1:
        return path[None]
    if len(path) == 1:
        return path
    qa, qb = path[:-1], path[1:]
    k = edge_subdivisions(qa, qb, resolution)
    edge = np.repeat(np.arange(len(k)), k)
    starts = np.repeat(np.cumsum(k) - k, k)
    t = ((np.arange(edge.size) - starts) / k[edge])[:, None]
    pts = (1.0 - t) * qa[edge] + t * qb[edge]
    return np.concatenate([pts, path[-1:]], axis=0)


# ---------------------------------------------------------------------------
# object-dependent validity


def _axis_distance(p) -> float:
    return float(math.hypot(p[0], p[1]))


def swept_object(env: Environment, grid: GridSpec, cell: Sequence[int]) -> list[Primitive]:
    """World-frame over-approximation of the object over every pose in ``cell``.

    Each primitive is placed at the cell's nominal pose and grown by half the
    translational cell diagonal plus the chord its farthest point sweeps
    under half the yaw width. Boxes become their circumscribing spheres first.
    """
    dx, dy, dz, dpsi = grid.widths
    trans = 0.5 * math.sqrt(dx * dx + dy * dy + dz * dz)
    T = cell_nominal(cell, grid).to_transform()
    out = []
    for p in env.object_shape:
        pts = p.frame.apply(p.points)
        if p.kind == "aabb":
            center = 0.5 * (pts[0] + pts[1])
            radius = 0.5 * float(np.linalg.norm(p.points[1] - p.points[0]))
            pts = center[None]
            kind = "sphere"
        else:
            radius = p.radius
            kind = p.kind
        r_max = max(_axis_distance(q) for q in pts)
        infl = trans + r_max * 0.5 * dpsi
        out.append(Primitive(kind, T.apply(pts), radius + infl))
    return out


def posed_object(env: Environment, pose: Pose4) -> list[Primitive]:
    T = pose.to_transform()
    return [p.posed(T) for p in env.object_shape]


@dataclass(frozen=True, eq=False)
class ValidityContext:
    """Which object placement the robot must avoid, plus the edge-check resolution.

    ``mode`` is ``"exact"`` (one object pose), ``"swept"`` (every pose of a
    cell) or ``"static"`` (object absent).
    """

    mode: str
    obstacles: tuple
    resolution: float = DEFAULT_RESOLUTION
    object_pose: Pose4 | None = None
    cell: CellIndex | None = None

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError("edge resolution must be positive")

    @classmethod
    def exact(cls, env: Environment, pose: Pose4, resolution: float = DEFAULT_RESOLUTION):
        return cls("exact", tuple(env.static_obstacles) + tuple(posed_object(env, pose)), resolution, object_pose=pose)

    @classmethod
    def swept(cls, env: Environment, grid: GridSpec, cell, resolution: float = DEFAULT_RESOLUTION):
        cell = CellIndex(*cell)
        obs = tuple(env.static_obstacles) + tuple(swept_object(env, grid, cell))
        return cls("swept", obs, resolution, cell=cell)

    @classmethod
    def static(cls, env: Environment, resolution: float = DEFAULT_RESOLUTION):
        return cls("static", tuple(env.static_obstacles), resolution)

    def checker(self, model: RobotModel) -> CollisionChecker:
        return CollisionChecker(model, self.obstacles)


def is_valid_config(model: RobotModel, env: Environment, ctx: ValidityContext, q) -> bool:
    return ctx.checker(model).config_valid(q)


def is_valid_edge(model: RobotModel, env: Environment, ctx: ValidityContext, q_a, q_b) -> bool:
    return ctx.checker(model).edge_valid(np.asarray(q_a, float), np.asarray(q_b, float), ctx.resolution)


def is_valid_path(model: RobotModel, env: Environment, ctx: ValidityContext, path) -> bool:
    return ctx.checker(model).path_valid(path, ctx.resolution)

"""Rigid transforms, task space regions and the task-space grid.

Object poses vary only in ``(x, y, z, psi)``; roll and pitch are fixed at zero.
A cell of the grid is an axis-aligned box in those coordinates that is small
enough for a single end-effector goal to stay inside the task space region of
every object pose in the cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

# slack used when comparing poses against the task-space bounds
BOUND_TOL = 1e-9


class OutOfTaskSpace(ValueError):
    """Raised when a pose lies outside the task-space bounds."""


def wrap_angle(a):
    """Wrap angle(s) into (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + math.pi, TWO_PI) - math.pi
    w = np.where(w == -math.pi, math.pi, w)
    return float(w) if np.ndim(w) == 0 else w


def wrap_psi(psi: float) -> float:
    """Wrap a yaw angle into (0, 2*pi]."""
    w = math.fmod(psi, TWO_PI)
    if w <= 0.0:
        w += TWO_PI
    return w


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rpy_to_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Rotation ``Rz(yaw) @ Ry(pitch) @ Rx(roll)``."""
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def matrix_to_rpy(R: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rpy_to_matrix`; works on ``(..., 3, 3)`` stacks."""
    R = np.asarray(R)
    roll = np.arctan2(R[..., 2, 1], R[..., 2, 2])
    pitch = np.arctan2(-R[..., 2, 0], np.hypot(R[..., 2, 1], R[..., 2, 2]))
    yaw = np.arctan2(R[..., 1, 0], R[..., 0, 0])
    return np.stack([roll, pitch, yaw], axis=-1)


@dataclass(frozen=True, eq=False)
class Transform:
    """Rigid transform ``p_parent = rotation @ p_child + translation``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Transform":
        return cls()

    @classmethod
    def from_xyz_rpy(cls, xyz: Sequence[float] = (0, 0, 0), rpy: Sequence[float] = (0, 0, 0)) -> "Transform":
        return cls(rpy_to_matrix(*rpy), xyz)

    @classmethod
    def from_matrix(cls, M: np.ndarray) -> "Transform":
        M = np.asarray(M, dtype=float)
        return cls(M[:3, :3], M[:3, 3])

    def as_matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def compose(self, other: "Transform") -> "Transform":
        return Transform(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    __matmul__ = compose

    def inverse(self) -> "Transform":
        Rt = self.rotation.T
        return Transform(Rt, -Rt @ self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map points of shape ``(..., 3)`` from the child to the parent frame."""
        return np.asarray(points) @ self.rotation.T + self.translation

    def rpy(self) -> np.ndarray:
        return matrix_to_rpy(self.rotation)

    def is_valid(self, tol: float = 1e-9) -> bool:
        R = self.rotation
        return bool(np.allclose(R @ R.T, np.eye(3), atol=tol) and abs(np.linalg.det(R) - 1.0) < tol)

    def __repr__(self) -> str:
        return f"Transform(xyz={self.translation.tolist()}, rpy={self.rpy().tolist()})"


class Pose4:
    """Object pose ``(x, y, z, psi)`` with roll = pitch = 0 and psi in (0, 2*pi]."""

    __slots__ = ("x", "y", "z", "psi")

    def __init__(self, x: float, y: float, z: float, psi: float):
        self.x = float(x)
        self.y = float(y)
        self.z = float(z)
        self.psi = wrap_psi(float(psi))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.psi])

    def to_transform(self) -> Transform:
        return Transform(rot_z(self.psi), (self.x, self.y, self.z))

    def __iter__(self):
        return iter((self.x, self.y, self.z, self.psi))

    def __eq__(self, other) -> bool:
        return isinstance(other, Pose4) and tuple(self) == tuple(other)

    def __repr__(self) -> str:
        return f"Pose4(x={self.x:.6g}, y={self.y:.6g}, z={self.z:.6g}, psi={self.psi:.6g})"


@dataclass(frozen=True)
class DisplacementBox:
    """Symmetric bounds ``|d| <= b`` on the local displacement of a TSR."""

    b_x: float
    b_y: float
    b_z: float
    b_roll: float = 0.0
    b_pitch: float = 0.0
    b_psi: float = 0.0

    def __post_init__(self):
        vals = self.as_array()
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ValueError(f"displacement bounds must be finite and >= 0, got {vals.tolist()}")

    def as_array(self) -> np.ndarray:
        return np.array([self.b_x, self.b_y, self.b_z, self.b_roll, self.b_pitch, self.b_psi], dtype=float)


@dataclass(frozen=True, eq=False)
class TsrSpec:
    bounds: DisplacementBox
    grasp_offset: Transform = field(default_factory=Transform)

    def __post_init__(self):
        if not self.grasp_offset.is_valid():
            raise ValueError("grasp offset is not a rigid transform")


def tsr_displacements(obj_R: np.ndarray, obj_t: np.ndarray, ee_pose: Transform, tsr: TsrSpec):
    """Local displacement ``T_o^-1 T_e T_s^-1`` for a stack of object poses.

    Returns translations ``(N, 3)`` and roll/pitch/yaw ``(N, 3)``.
    """
    obj_R = np.asarray(obj_R, dtype=float).reshape(-1, 3, 3)
    obj_t = np.asarray(obj_t, dtype=float).reshape(-1, 3)
    es = ee_pose @ tsr.grasp_offset.inverse()
    RoT = np.transpose(obj_R, (0, 2, 1))
    R = RoT @ es.rotation
    t = np.einsum("nij,nj->ni", RoT, es.translation - obj_t)
    return t, matrix_to_rpy(R)


def tsr_contains_many(obj_R, obj_t, ee_pose: Transform, tsr: TsrSpec, atol: float = 1e-9) -> np.ndarray:
    """Vectorised :func:`tsr_contains` over ``N`` object poses."""
    t, rpy = tsr_displacements(obj_R, obj_t, ee_pose, tsr)
    b = tsr.bounds.as_array()
    ok_t = np.all(np.abs(t) <= b[:3] + atol, axis=1)
    ok_r = np.all(np.abs(wrap_angle(rpy)) <= b[3:] + atol, axis=1)
    return ok_t & ok_r


def tsr_contains(object_pose: Transform, ee_pose: Transform, tsr: TsrSpec, atol: float = 1e-9) -> bool:
    """True iff ``ee_pose`` lies in the task space region of ``object_pose``.

    ``atol`` absorbs floating-point noise only; it is far below any bound used in practice.
    """
    return bool(tsr_contains_many(object_pose.rotation, object_pose.translation, ee_pose, tsr, atol)[0])


def inner_box(tsr: TsrSpec) -> tuple[float, float, float, float]:
    """Cell widths ``(dx, dy, dz, dpsi)`` of a box that fits inside every coverage region.

    The xy half-width is the largest axis-aligned square inscribed in the
    disc of radius ``min(b_x, b_y)``, so it holds for any object yaw.
    """
    b = tsr.bounds
    if min(b.b_x, b.b_y, b.b_z, b.b_psi) <= 0.0:
        raise ValueError(
            "TSR bounds need a non-empty interior in (x, y, z, psi); "
            f"got b_x={b.b_x}, b_y={b.b_y}, b_z={b.b_z}, b_psi={b.b_psi}"
        )
    h_xy = min(b.b_x, b.b_y) / math.sqrt(2.0)
    return 2.0 * h_xy, 2.0 * h_xy, 2.0 * b.b_z, 2.0 * b.b_psi


class CellIndex(NamedTuple):
    i_x: int
    i_y: int
    i_z: int
    i_psi: int


def _count(extent: float, width: float) -> int:
    if extent <= 0.0:
        return 1
    return max(1, math.ceil(extent / width - 1e-9))


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid over ``[lower, upper]`` in (x, y, z) and (0, 2*pi] in yaw."""

    lower: tuple[float, float, float]
    upper: tuple[float, float, float]
    widths: tuple[float, float, float, float]
    counts: tuple[int, int, int, int]

    @classmethod
    def from_tsr(cls, lower: Sequence[float], upper: Sequence[float], tsr: TsrSpec) -> "GridSpec":
        lower = tuple(float(v) for v in lower)
        upper = tuple(float(v) for v in upper)
        if any(h < l for l, h in zip(lower, upper)):
            raise ValueError(f"task-space upper bound below lower bound: {lower} > {upper}")
        widths = inner_box(tsr)
        extents = [h - l for l, h in zip(lower, upper)] + [TWO_PI]
        counts = tuple(_count(e, w) for e, w in zip(extents, widths))
        return cls(lower, upper, tuple(widths), counts)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.counts))

    def contains(self, pose: Pose4) -> bool:
        return all(
            l - BOUND_TOL <= v <= h + BOUND_TOL
            for v, l, h in zip((pose.x, pose.y, pose.z), self.lower, self.upper)
        )

    def cells(self):
        """All cell indices in row-major order."""
        nx, ny, nz, npsi = self.counts
        for ix in range(nx):
            for iy in range(ny):
                for iz in range(nz):
                    for ip in range(npsi):
                        yield CellIndex(ix, iy, iz, ip)

    def flat(self, index: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(index), self.counts))

    def unflat(self, k: int) -> CellIndex:
        return CellIndex(*(int(v) for v in np.unravel_index(k, self.counts)))

    def nominal_array(self) -> np.ndarray:
        """Nominal poses of every cell, ``(n_cells, 4)`` in flat order."""
        axes = []
        for d in range(4):
            i = np.arange(self.counts[d])
            axes.append(_centers(i, d, self))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


def _centers(i, d: int, grid: GridSpec):
    if d == 3:
        lo, hi = 0.0, TWO_PI
    else:
        lo, hi = grid.lower[d], grid.upper[d]
    if hi <= lo:
        return np.full(np.shape(i), lo, dtype=float)
    return np.minimum(lo + (np.asarray(i) + 0.5) * grid.widths[d], hi)


def cell_index(pose: Pose4, grid: GridSpec) -> CellIndex:
    """Grid cell of ``pose``; cells are half-open and the upper boundary clamps into the last cell."""
    lower, upper, widths, counts = grid.lower, grid.upper, grid.widths, grid.counts
    vals = (pose.x, pose.y, pose.z)
    idx = []
    for d in range(3):
        v = vals[d]
        if v < lower[d] - BOUND_TOL or v > upper[d] + BOUND_TOL:
            raise OutOfTaskSpace(f"{pose!r} outside task space {lower}..{upper}")
        i = math.floor((v - lower[d]) / widths[d])
        idx.append(min(max(i, 0), counts[d] - 1))
    i = math.floor(pose.psi / widths[3])
    idx.append(min(max(i, 0), counts[3] - 1))
    return CellIndex(*idx)


def cell_nominal(index: Sequence[int], grid: GridSpec) -> Pose4:
    """Center of a cell, clipped to the task space for partial edge cells."""
    if len(index) != 4 or any(not 0 <= int(i) < n for i, n in zip(index, grid.counts)):
        raise IndexError(f"cell {tuple(index)} out of range for grid counts {grid.counts}")
    c = [float(_centers(int(index[d]), d, grid)) for d in range(4)]
    return Pose4(*c)


def certified_goal(index: Sequence[int], grid: GridSpec, tsr: TsrSpec) -> Transform:
    """End-effector pose that is a valid goal for every object pose inside the cell."""
    return cell_nominal(index, grid).to_transform() @ tsr.grasp_offset


def pose_metric(poses: np.ndarray, ref: np.ndarray, r_scale: float) -> np.ndarray:
    """Euclidean distance on (x, y, z, wrapped yaw * r_scale)."""
    d = np.asarray(poses, dtype=float) - np.asarray(ref, dtype=float)
    dpsi = wrap_angle(d[..., 3]) * r_scale
    return np.sqrt(np.sum(d[..., :3] ** 2, axis=-1) + dpsi**2)

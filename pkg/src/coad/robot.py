"""Serial revolute chains: forward kinematics, geometric Jacobian and DLS inverse kinematics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .transforms import Pose4, Transform


@dataclass(frozen=True, eq=False)
class Joint:
    """Revolute joint; ``origin`` places the joint frame in the parent link frame at q = 0."""

    origin: Transform
    axis: np.ndarray
    lower: float
    upper: float

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float).reshape(3)
        if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
            raise ValueError(f"joint axis must be a unit vector, got {axis.tolist()}")
        if not self.lower < self.upper:
            raise ValueError(f"joint limits need lower < upper, got ({self.lower}, {self.upper})")
        object.__setattr__(self, "axis", axis)


@dataclass(frozen=True)
class Capsule:
    """Segment ``a``-``b`` swept by a ball of ``radius``, in link coordinates."""

    a: tuple[float, float, float]
    b: tuple[float, float, float]
    radius: float


@dataclass(eq=False)
class RobotModel:
    joints: list[Joint]
    links: list[list[Capsule]]
    ee_offset: Transform = field(default_factory=Transform)
    allowed_collisions: frozenset = frozenset()

    def __post_init__(self):
        if len(self.links) != len(self.joints):
            raise ValueError("need one (possibly empty) capsule list per joint")
        self.lower = np.array([j.lower for j in self.joints])
        self.upper = np.array([j.upper for j in self.joints])
        self.allowed_collisions = frozenset(frozenset(p) for p in self.allowed_collisions)
        n = self.dof
        self._origins = np.stack([j.origin.as_matrix() for j in self.joints])
        axes = np.stack([j.axis for j in self.joints])
        K = np.zeros((n, 3, 3))
        K[:, 0, 1], K[:, 0, 2] = -axes[:, 2], axes[:, 1]
        K[:, 1, 0], K[:, 1, 2] = axes[:, 2], -axes[:, 0]
        K[:, 2, 0], K[:, 2, 1] = -axes[:, 1], axes[:, 0]
        self._axes = axes
        self._K = K
        self._K2 = K @ K
        self._ee = self.ee_offset.as_matrix()

    @property
    def dof(self) -> int:
        return len(self.joints)

    def self_collision_pairs(self) -> list[tuple[int, int]]:
        """Non-adjacent link pairs that both carry geometry."""
        pairs = []
        for i in range(self.dof):
            for j in range(i + 2, self.dof):
                if self.links[i] and self.links[j] and frozenset((i, j)) not in self.allowed_collisions:
                    pairs.append((i, j))
        return pairs

    def within_limits(self, q, tol: float = 0.0) -> bool:
        q = np.asarray(q)
        return bool(np.all(q >= self.lower - tol) and np.all(q <= self.upper + tol))

    def clamp(self, q) -> np.ndarray:
        return np.clip(q, self.lower, self.upper)

    def mid_configuration(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)


def _check_q(model: RobotModel, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != model.dof:
        raise ValueError(f"configuration has {q.shape[-1]} joints, model has {model.dof}")
    return q


def link_frames(model: RobotModel, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched link frames.

    Parameters
    ----------
    Q : ndarray, shape (N, n)

    Returns
    -------
    frames : ndarray, shape (N, n, 4, 4)
        World frame of each link (joint frame after its rotation).
    ee : ndarray, shape (N, 4, 4)
    """
    Q = _check_q(model, Q).reshape(-1, model.dof)
    N = Q.shape[0]
    frames = np.empty((N, model.dof, 4, 4))
    T = np.broadcast_to(np.eye(4), (N, 4, 4))
    eye3 = np.eye(3)
    s, c = np.sin(Q), np.cos(Q)
    for i in range(model.dof):
        R = eye3 + s[:, i, None, None] * model._K[i] + (1.0 - c[:, i, None, None]) * model._K2[i]
        To = T @ model._origins[i]
        Ti = np.empty((N, 4, 4))
        Ti[:, :3, :3] = To[:, :3, :3] @ R
        Ti[:, :3, 3] = To[:, :3, 3]
        Ti[:, 3] = (0.0, 0.0, 0.0, 1.0)
        frames[:, i] = Ti
        T = Ti
    return frames, T @ model._ee


def fk(model: RobotModel, q) -> Transform:
    """End-effector pose for a single configuration."""
    q = _check_q(model, q)
    if q.ndim != 1:
        raise ValueError("fk expects a single configuration; use link_frames for batches")
    _, ee = link_frames(model, q[None])
    return Transform.from_matrix(ee[0])


def fk_positions(model: RobotModel, Q: np.ndarray) -> np.ndarray:
    """End-effector positions for a batch, ``(N, 3)``."""
    _, ee = link_frames(model, Q)
    return ee[:, :3, 3]


def _jacobian_from_frames(model: RobotModel, frames: np.ndarray, ee: np.ndarray) -> np.ndarray:
    z = np.einsum("nij,nj->ni", frames[:, :3, :3], model._axes)
    p = frames[:, :3, 3]
    J = np.empty((6, model.dof))
    J[:3] = np.cross(z, ee[:3, 3] - p).T
    J[3:] = z.T
    return J


def jacobian(model: RobotModel, q) -> np.ndarray:
    """Geometric Jacobian ``(6, n)`` of the end-effector frame; rows are [linear; angular]."""
    q = _check_q(model, q)
    frames, ee = link_frames(model, q[None])
    return _jacobian_from_frames(model, frames[0], ee[0])


def rotation_error(R_target: np.ndarray, R: np.ndarray) -> np.ndarray:
    """World-frame rotation vector taking ``R`` to ``R_target``."""
    Re = R_target @ R.T
    cos = np.clip((np.trace(Re) - 1.0) * 0.5, -1.0, 1.0)
    angle = math.acos(cos)
    v = np.array([Re[2, 1] - Re[1, 2], Re[0, 2] - Re[2, 0], Re[1, 0] - Re[0, 1]])
    s = math.sin(angle)
    if s < 1e-7:
        if cos > 0:
            return 0.5 * v
        # near pi: axis from the symmetric part
        M = 0.5 * (Re + np.eye(3))
        k = int(np.argmax(np.diag(M)))
        axis = M[:, k] / math.sqrt(max(M[k, k], 1e-300))
        return angle * axis
    return v * (angle / (2.0 * s))


STALL_RATIO = 1e-3
STALL_LIMIT = 5
STALL_WINDOW = 20


@dataclass(frozen=True)
class IkOptions:
    damping: float = 1e-3
    max_step: float = 0.2
    max_iterations: int = 200
    pos_tol: float = 1e-4
    rot_tol: float = 1e-3
    # keep iterating past the acceptance tolerances down to this residual
    refine_tol: float = 1e-10


def ik(model: RobotModel, target, warm_start, opts: IkOptions | None = None):
    """Damped least-squares inverse kinematics.

    Parameters
    ----------
    target : Transform or Pose4
        Goal end-effector pose.
    warm_start : array_like
        Initial configuration; must be within the joint limits.

    Returns
    -------
    ndarray or None
        A configuration within the joint limits whose end-effector is within
        ``pos_tol`` (m) and ``rot_tol`` (rad) of the target, or ``None``.
    """
    opts = opts or IkOptions()
    if isinstance(target, Pose4):
        target = target.to_transform()
    q = _check_q(model, warm_start).astype(float).copy()
    if not model.within_limits(q):
        raise ValueError("IK warm start is outside the joint limits")
    q, pos_err, rot_err = _kernels.dls_ik(
        q, target.rotation, target.translation, model._origins, model._axes, model._ee,
        model.lower, model.upper, opts.damping, opts.max_step, opts.max_iterations,
        opts.refine_tol, STALL_RATIO, STALL_LIMIT, STALL_WINDOW,
    )
    if pos_err < opts.pos_tol and rot_err < opts.rot_tol:
        return q
    return None


def ik_error(model: RobotModel, q, target: Transform) -> tuple[float, float]:
    """Position (m) and rotation (rad) error of ``fk(q)`` against ``target``."""
    T = fk(model, q)
    return (
        float(np.linalg.norm(target.translation - T.translation)),
        float(np.linalg.norm(rotation_error(target.rotation, T.rotation))),
    )

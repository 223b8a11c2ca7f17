"""Linear-interpolation adapter: append a straight joint-space tail to the root path."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..robot import fk_positions
from .base import Adapter, RawPath


@dataclass(frozen=True)
class LiOpts:
    T_end: int = 10
    chord_tolerance: float = 0.05
    continuity_samples: int = 20


def li_adapt(root: RawPath, q_goal, opts: LiOpts = LiOpts()) -> np.ndarray:
    """Root path followed by ``T_end`` interpolated waypoints ending exactly at ``q_goal``.

    The root's last waypoint plays the role of step 0 of the tail, so the
    appended points are steps ``1..T_end``.
    """
    wp = root.waypoints
    q_root = wp[-1]
    q_goal = np.asarray(q_goal, dtype=float)
    n = np.arange(1, opts.T_end + 1, dtype=float)[:, None] / opts.T_end
    tail = q_root + n * (q_goal - q_root)
    tail[-1] = q_goal
    return np.concatenate([wp, tail])


def li_continuity_check(model, root_end, q_goal, opts: LiOpts = LiOpts()) -> bool:
    """End-effector stays within ``chord_tolerance`` of the straight workspace chord.

    Samples configurations on the joint-space segment and measures their
    end-effector distance to the segment between the two endpoint positions.
    """
    root_end = np.asarray(root_end, dtype=float)
    q_goal = np.asarray(q_goal, dtype=float)
    t = np.linspace(0.0, 1.0, opts.continuity_samples)[:, None]
    P = fk_positions(model, (1.0 - t) * root_end + t * q_goal)
    a, b = P[0], P[-1]
    d = b - a
    dd = float(d @ d)
    s = np.clip((P - a) @ d / dd, 0.0, 1.0) if dd > 0 else np.zeros(len(P))
    dev = np.linalg.norm(P - (a + s[:, None] * d), axis=1)
    return bool(np.all(dev <= opts.chord_tolerance))


class LiAdapter(Adapter):
    name = "li"

    def __init__(self, opts: LiOpts | None = None):
        self.opts = opts or LiOpts()

    @classmethod
    def from_options(cls, options: dict) -> "LiAdapter":
        return cls(LiOpts(**options))

    def options_dict(self) -> dict:
        return asdict(self.opts)

    def build_root_motion(self, path) -> RawPath:
        return RawPath(path)

    def adapt(self, root: RawPath, q_goal) -> np.ndarray:
        return li_adapt(root, q_goal, self.opts)

    def accepts(self, model, root: RawPath, q_goal) -> bool:
        return li_continuity_check(model, root.waypoints[-1], q_goal, self.opts)

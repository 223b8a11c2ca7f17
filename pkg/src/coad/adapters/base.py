from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


class AdaptationError(RuntimeError):
    """The adapter could not produce a path (divergence, solver failure, goal miss)."""


@dataclass(frozen=True, eq=False)
class RawPath:
    waypoints: np.ndarray

    def __post_init__(self):
        w = np.array(self.waypoints, dtype=float)
        if w.ndim != 2 or len(w) < 2:
            raise ValueError("a raw path needs a (T, n) waypoint array with T >= 2")
        w.setflags(write=False)
        object.__setattr__(self, "waypoints", w)

    @property
    def q_start(self) -> np.ndarray:
        return self.waypoints[0]

    @property
    def q_end(self) -> np.ndarray:
        return self.waypoints[-1]


@dataclass(frozen=True, eq=False)
class DmpWeights:
    """Per-joint basis weights ``(n, N_B)`` plus the demonstration's start and goal."""

    weights: np.ndarray
    q_start: np.ndarray
    demo_goal: np.ndarray

    def __post_init__(self):
        for name in ("weights", "q_start", "demo_goal"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.weights.ndim != 2 or self.weights.shape[0] != self.q_start.size:
            raise ValueError("DMP weights must be (n_joints, n_basis)")


RootMotion = Union[RawPath, DmpWeights]


class Adapter:
    """Interface shared by the adaptation strategies."""

    name = "base"

    @classmethod
    def from_options(cls, options: dict) -> "Adapter":
        raise NotImplementedError

    def options_dict(self) -> dict:
        raise NotImplementedError

    def build_root_motion(self, path: np.ndarray) -> RootMotion:
        raise NotImplementedError

    def adapt(self, root: RootMotion, q_goal) -> np.ndarray:
        raise NotImplementedError

    def with_limits(self, lower, upper) -> "Adapter":
        """Adapter that respects the given joint limits; limit-agnostic adapters return self."""
        return self

    def bind(self, model) -> "Adapter":
        return self.with_limits(model.lower, model.upper)

    def accepts(self, model, root: RootMotion, q_goal) -> bool:
        """Extra adapter-specific acceptance test run during verification."""
        return True

    def q_start(self, root: RootMotion) -> np.ndarray:
        return root.q_start

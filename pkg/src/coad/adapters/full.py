"""Pass-through adapter for libraries that store one planned path per cell."""

from __future__ import annotations

import numpy as np

from .base import AdaptationError, Adapter, RawPath


class FullAdapter(Adapter):
    """Returns the stored path unchanged; it only accepts that path's own goal."""

    name = "full"

    @classmethod
    def from_options(cls, options: dict) -> "FullAdapter":
        if options:
            raise ValueError(f"the full-library adapter takes no options, got {sorted(options)}")
        return cls()

    def options_dict(self) -> dict:
        return {}

    def build_root_motion(self, path) -> RawPath:
        return RawPath(path)

    def adapt(self, root: RawPath, q_goal) -> np.ndarray:
        if not np.array_equal(root.q_end, np.asarray(q_goal, dtype=float)):
            raise AdaptationError("a stored full-library path only reaches its own goal")
        return root.waypoints.copy()

"""Dynamic movement primitive adapter.

Each joint follows ``qdd = a_y (b_y (g - q) - qd) + f(s)`` with a forcing term
``f`` that is a normalised Gaussian mixture over the phase
``s = exp(-a_s k / T)``. Fitting learns ``f`` from the root path; adapting
rolls the system out with a new goal ``g``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from .base import AdaptationError, Adapter, DmpWeights

DIVERGENCE_LIMIT = 1e3
SNAP_TOLERANCE = 1e-3


@dataclass(frozen=True)
class DmpOpts:
    alpha_y: float = 25.0
    beta_y: float = 6.25
    alpha_s: float = 4.0
    n_basis: int = 25
    T: int = 200
    ridge: float = 1e-8


@lru_cache(maxsize=16)
def _features(alpha_s: float, n_basis: int, T: int) -> np.ndarray:
    """Normalised basis activations ``(T, n_basis)`` at every rollout step."""
    s = np.exp(-alpha_s * np.arange(T) / T)
    # centres evenly spaced in time across the rollout
    c = np.exp(-alpha_s * np.linspace(0.0, (T - 1) / T, n_basis))
    dc = np.abs(np.diff(c))
    h = 1.0 / np.concatenate([dc, dc[-1:]]) ** 2
    psi = np.exp(-h * (s[:, None] - c) ** 2)
    phi = psi / psi.sum(axis=1, keepdims=True)
    phi.setflags(write=False)
    return phi


def _euler_free(y0: np.ndarray, g: np.ndarray, f: np.ndarray | None, opts: DmpOpts) -> np.ndarray:
    """Explicit-Euler rollout of the transformation system; ``f`` is ``(T, n)`` or None."""
    dt = 1.0 / opts.T
    ay, by = opts.alpha_y, opts.beta_y
    out = np.empty((opts.T,) + np.shape(y0))
    y = np.array(y0, dtype=float)
    v = np.zeros_like(y)
    out[0] = y
    for k in range(opts.T - 1):
        acc = ay * (by * (g - y) - v)
        if f is not None:
            acc = acc + f[k]
        y = y + dt * v
        v = v + dt * acc
        out[k + 1] = y
    return out


@lru_cache(maxsize=16)
def _fit_system(opts: DmpOpts) -> tuple[np.ndarray, np.ndarray]:
    """Position response to each basis weight, and the factor of the anchored normal equations.

    Rolling out from zero start towards a zero goal with forcing ``e_k``
    gives the response to a unit impulse at step ``k``; stacking those and
    mixing with the basis activations maps weights to positions.
    """
    phi = _features(opts.alpha_s, opts.n_basis, opts.T)
    S = _euler_free(np.zeros(opts.T), np.zeros(opts.T), np.eye(opts.T), opts)
    M = S @ phi
    nb = opts.n_basis
    K = np.zeros((nb + 1, nb + 1))
    K[:nb, :nb] = M.T @ M + opts.ridge * np.eye(nb)
    K[:nb, nb] = K[nb, :nb] = M[-1]
    M.setflags(write=False)
    return M, np.linalg.inv(K)


def dmp_fit(path, opts: DmpOpts = DmpOpts()) -> DmpWeights:
    """Fit per-joint forcing weights to a ``(T, n)`` demonstration.

    The weights solve a ridge-regularised least-squares problem on the
    rollout positions themselves, with the final rollout position pinned to
    the demonstration's goal. Fitting positions rather than the pointwise
    forcing target matters because the rollout starts at rest while a
    resampled path already moves at its first waypoint.
    """
    path = np.asarray(path, dtype=float)
    if path.ndim != 2 or len(path) != opts.T:
        raise ValueError(f"demonstration must be (T={opts.T}, n), got {path.shape}")
    M, K_inv = _fit_system(opts)
    R = path - _euler_free(path[0], path[-1], None, opts)
    sol = K_inv @ np.vstack([M.T @ R, R[-1:]])
    return DmpWeights(sol[: opts.n_basis].T, path[0], path[-1])


@lru_cache(maxsize=16)
def _rollout_system(opts: DmpOpts) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Responses to a unit start, a unit goal and each basis weight.

    The Euler recursion is linear in all three, so a rollout is their
    superposition and costs one small matrix product.
    """
    a = _euler_free(1.0, 0.0, None, opts)
    b = _euler_free(0.0, 1.0, None, opts)
    M, _ = _fit_system(opts)
    for arr in (a, b):
        arr.setflags(write=False)
    return a[:, None], b[:, None], M


def dmp_rollout(w: DmpWeights, q_goal, opts: DmpOpts = DmpOpts()) -> np.ndarray:
    """Explicit-Euler rollout from rest at ``w.q_start`` towards ``q_goal``; no snapping.

    Evaluated in closed form; :func:`dmp_rollout_stepwise` runs the same
    recursion step by step.
    """
    a, b, M = _rollout_system(opts)
    return a * w.q_start + b * np.asarray(q_goal, dtype=float) + M @ w.weights.T


def dmp_rollout_stepwise(w: DmpWeights, q_goal, opts: DmpOpts = DmpOpts()) -> np.ndarray:
    f = _features(opts.alpha_s, opts.n_basis, opts.T) @ w.weights.T
    return _euler_free(w.q_start, np.asarray(q_goal, dtype=float), f, opts)


def dmp_adapt(w: DmpWeights, q_goal, opts: DmpOpts = DmpOpts()) -> tuple[np.ndarray, float]:
    """Rollout with the last waypoint snapped onto ``q_goal``.

    Returns the path and the snap distance (max per-joint, rad). Raises
    :class:`AdaptationError` on divergence or when the rollout ends farther
    than ``SNAP_TOLERANCE`` from the goal.
    """
    path = dmp_rollout(w, q_goal, opts)
    if not np.all(np.isfinite(path)) or np.max(np.abs(path)) > DIVERGENCE_LIMIT:
        raise AdaptationError("DMP rollout diverged")
    g = np.asarray(q_goal, dtype=float)
    snap = float(np.max(np.abs(path[-1] - g)))
    if snap >= SNAP_TOLERANCE:
        raise AdaptationError(f"DMP rollout ends {snap:.3g} rad from the goal")
    path[-1] = g
    return path, snap


class DmpAdapter(Adapter):
    name = "dmp"

    def __init__(self, opts: DmpOpts | None = None):
        self.opts = opts or DmpOpts()

    @classmethod
    def from_options(cls, options: dict) -> "DmpAdapter":
        return cls(DmpOpts(**options))

    def options_dict(self) -> dict:
        return asdict(self.opts)

    def build_root_motion(self, path) -> DmpWeights:
        return dmp_fit(path, self.opts)

    def adapt(self, root: DmpWeights, q_goal) -> np.ndarray:
        return dmp_adapt(root, q_goal, self.opts)[0]

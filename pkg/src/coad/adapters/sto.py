"""Smoothness-regularised trajectory refinement as one convex QP per query.

The waypoints ``q_0..q_{T-1}`` of every joint minimise

    w_v |D1 q|^2 + w_a |D2 q|^2 + w_s |q - q_root|^2

with both endpoints pinned and each waypoint inside the joint limits. ``D1``
holds forward differences and ``D2`` interior second differences, so no
ghost points beyond the endpoints are assumed. The joints decouple, which lets
one factorisation serve every joint as a separate right-hand-side column.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from .base import AdaptationError, Adapter, RawPath
from .qp import QpOptions, QpResult, QpWorkspace

FAILURE_RESIDUAL = 1e-3


@dataclass(frozen=True)
class StoOpts:
    w_v: float = 1.0
    w_a: float = 1.0
    w_s: float = 0.1
    T: int = 200
    max_iter: int = 4000
    eps: float = 1e-6
    rho: float = 0.1


def difference_operators(N: int) -> tuple[np.ndarray, np.ndarray]:
    """``D1`` of shape ``(N-1, N)`` and ``D2`` of shape ``(N-2, N)``."""
    D1 = np.diff(np.eye(N), axis=0)
    D2 = np.diff(np.eye(N), n=2, axis=0)
    return D1, D2


def _hessian(N: int, opts: StoOpts) -> np.ndarray:
    D1, D2 = difference_operators(N)
    H = opts.w_v * D1.T @ D1 + opts.w_a * D2.T @ D2 + opts.w_s * np.eye(N)
    return 2.0 * H


@lru_cache(maxsize=8)
def _workspace(N: int, opts: StoOpts) -> QpWorkspace:
    eq = np.zeros(N, bool)
    eq[[0, -1]] = True
    # fixed rho keeps one factorisation per workspace and a predictable per-query cost
    qp_opts = QpOptions(rho=opts.rho, max_iter=opts.max_iter, eps=opts.eps, adapt_rho_every=0)
    return QpWorkspace(_hessian(N, opts), None, eq, qp_opts)


def sto_objective(path, root, opts: StoOpts = StoOpts()) -> float:
    """Objective value of a ``(N, n)`` path against root waypoints of the same shape."""
    path = np.asarray(path, dtype=float)
    dv = np.diff(path, axis=0)
    da = np.diff(path, n=2, axis=0)
    ds = path - np.asarray(root, dtype=float)
    return float(opts.w_v * np.sum(dv * dv) + opts.w_a * np.sum(da * da) + opts.w_s * np.sum(ds * ds))


def straight_line(q_start, q_goal, N: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, N)[:, None]
    q_start = np.asarray(q_start, dtype=float)
    return q_start + t * (np.asarray(q_goal, dtype=float) - q_start)


def sto_solve(root: RawPath, q_start, q_goal, limits, opts: StoOpts = StoOpts()) -> tuple[np.ndarray, QpResult]:
    """Raw QP solution ``(N, n)`` and solver result, before any clipping or snapping."""
    R = np.asarray(root.waypoints, dtype=float)
    N, n = R.shape
    lo, hi = (np.asarray(b, dtype=float) for b in limits)
    ws = _workspace(N, opts)
    l = np.broadcast_to(lo, (N, n)).copy()
    u = np.broadcast_to(hi, (N, n)).copy()
    l[0] = u[0] = np.asarray(q_start, dtype=float)
    l[-1] = u[-1] = np.asarray(q_goal, dtype=float)
    res = ws.solve(-2.0 * opts.w_s * R, l, u, x0=np.clip(R, l, u))
    return res.x, res


def sto_adapt(root: RawPath, q_start, q_goal, limits, opts: StoOpts = StoOpts()) -> np.ndarray:
    """Refine ``root`` into a smooth path from ``q_start`` to ``q_goal`` inside ``limits``.

    ``limits`` is a ``(lower, upper)`` pair of per-joint arrays. The returned
    endpoints are exactly ``q_start`` and ``q_goal``. Raises
    :class:`AdaptationError` when the solver stalls with residuals above 1e-3.
    """
    x, res = sto_solve(root, q_start, q_goal, limits, opts)
    if not res.solved and max(res.prim_res, res.dual_res) > FAILURE_RESIDUAL:
        raise AdaptationError(
            f"STO solver stopped after {res.iterations} iterations "
            f"(primal {res.prim_res:.2e}, dual {res.dual_res:.2e})"
        )
    if not np.all(np.isfinite(x)):
        raise AdaptationError("STO solver produced non-finite waypoints")
    lo, hi = limits
    path = np.clip(x, lo, hi)
    path[0] = q_start
    path[-1] = q_goal
    return path


class StoAdapter(Adapter):
    name = "sto"

    def __init__(self, opts: StoOpts | None = None, limits=None):
        self.opts = opts or StoOpts()
        self.limits = limits

    @classmethod
    def from_options(cls, options: dict) -> "StoAdapter":
        options = dict(options)
        limits = options.pop("limits", None)
        return cls(StoOpts(**options), limits)

    def options_dict(self) -> dict:
        return asdict(self.opts)

    def with_limits(self, lower, upper) -> "StoAdapter":
        return StoAdapter(self.opts, (np.asarray(lower, dtype=float), np.asarray(upper, dtype=float)))

    def build_root_motion(self, path) -> RawPath:
        return RawPath(path)

    def adapt(self, root: RawPath, q_goal) -> np.ndarray:
        if self.limits is None:
            n = root.waypoints.shape[1]
            limits = (np.full(n, -np.inf), np.full(n, np.inf))
        else:
            limits = self.limits
        return sto_adapt(root, root.q_start, q_goal, limits, self.opts)

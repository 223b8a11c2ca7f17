"""Operator-splitting (ADMM) solver for convex quadratic programs.

Solves ``min 1/2 x'Px + q'x  s.t.  l <= Ax <= u`` with the OSQP iteration:
a fixed-penalty ADMM whose linear system is factored once per (P, A, rho).
Several right-hand sides sharing ``P`` and ``A`` can be solved at once by
passing ``q``, ``l`` and ``u`` with a trailing column axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

EQ_RHO_SCALE = 1e3


@dataclass(frozen=True)
class QpOptions:
    rho: float = 0.1
    sigma: float = 1e-6
    alpha: float = 1.6
    max_iter: int = 4000
    eps: float = 1e-6
    check_every: int = 10
    polish: bool = True
    # try polishing once ADMM residuals fall below this
    polish_trigger: float = 1e-2
    # rebalance rho from the residual ratio every this many iterations (0 disables)
    adapt_rho_every: int = 50
    adapt_rho_factor: float = 5.0


@dataclass
class QpResult:
    x: np.ndarray
    y: np.ndarray
    iterations: int
    prim_res: float
    dual_res: float
    solved: bool
    polished: bool = False

    @property
    def success(self) -> bool:
        return self.solved


def _columns(b, m: int, k: int) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    b = b.reshape(m, 1) if b.size == m else b.reshape(m, k)
    return np.broadcast_to(b, (m, k))


class QpWorkspace:
    """Factorisation shared by every problem with the same ``P``, ``A`` and equality rows.

    ``A=None`` means the identity, which keeps box-constrained problems cheap.
    """

    def __init__(self, P, A, eq_rows, opts: QpOptions | None = None):
        self.opts = opts or QpOptions()
        self.P = np.asarray(P, dtype=float)
        n = self.P.shape[0]
        self.A = None if A is None else np.asarray(A, dtype=float).reshape(-1, n)
        m = n if self.A is None else self.A.shape[0]
        self.n, self.m = n, m
        eq_rows = np.zeros(m, bool) if eq_rows is None else np.asarray(eq_rows, bool).reshape(m)
        self.eq_rows = eq_rows
        rho = np.full(m, self.opts.rho)
        rho[eq_rows] *= EQ_RHO_SCALE
        self.rho = rho[:, None]
        self._cho = self._factor(1.0)
        self._polish_cache: dict = {}

    def _factor(self, scale: float):
        rho = scale * self.rho[:, 0]
        K = self.P + self.opts.sigma * np.eye(self.n)
        if self.A is None:
            K[np.diag_indices(self.n)] += rho
        elif self.m:
            K += self.A.T @ (rho[:, None] * self.A)
        return linalg.cho_factor(K)

    def _rescale(self, x, z, y, q, r_prim, r_dual) -> float:
        """Factor bringing the normalised primal and dual residuals into balance."""
        Ax, ATy = self._Ax(x), self._ATy(y)
        tiny = 1e-12
        p = r_prim / max(np.max(np.abs(Ax)), np.max(np.abs(z)), tiny)
        d = r_dual / max(np.max(np.abs(self.P @ x)), np.max(np.abs(ATy)), np.max(np.abs(q)), tiny)
        return float(np.sqrt(max(p, tiny) / max(d, tiny)))

    def _Ax(self, x):
        return x if self.A is None else self.A @ x

    def _ATy(self, y):
        return y if self.A is None else self.A.T @ y

    def residuals(self, x, z, y, q):
        Ax = self._Ax(x)
        r_prim = float(np.max(np.abs(Ax - z))) if self.m else 0.0
        r_dual = float(np.max(np.abs(self.P @ x + q + self._ATy(y)))) if self.m else float(np.max(np.abs(self.P @ x + q)))
        return r_prim, r_dual

    def solve(self, q, l, u, x0=None, y0=None) -> QpResult:
        o = self.opts
        q = np.asarray(q, dtype=float)
        squeeze = q.ndim == 1
        q = q.reshape(self.n, -1)
        k = q.shape[1]
        l = _columns(l, self.m, k)
        u = _columns(u, self.m, k)
        x = np.zeros((self.n, k)) if x0 is None else np.array(x0, dtype=float).reshape(self.n, k)
        z = np.clip(self._Ax(x), l, u)
        y = np.zeros((self.m, k)) if y0 is None else np.array(y0, dtype=float).reshape(self.m, k)
        rho, sigma, alpha = self.rho, o.sigma, o.alpha
        cho, scale = self._cho, 1.0
        r_prim = r_dual = np.inf
        solved = polished = False
        it = 0
        if self.m == 0:
            x = linalg.solve(self.P, -q, assume_a="sym")
            r_prim, r_dual = self.residuals(x, z, y, q)
            solved = r_dual < o.eps
        else:
            while it < o.max_iter:
                rhs = sigma * x - q + self._ATy(rho * z - y)
                xt = linalg.cho_solve(cho, rhs)
                zt = self._Ax(xt)
                x = alpha * xt + (1.0 - alpha) * x
                zr = alpha * zt + (1.0 - alpha) * z
                z_new = np.clip(zr + y / rho, l, u)
                y = y + rho * (zr - z_new)
                z = z_new
                it += 1
                if it % o.check_every == 0 or it == o.max_iter:
                    r_prim, r_dual = self.residuals(x, z, y, q)
                    if r_prim < o.eps and r_dual < o.eps:
                        solved = True
                        break
                    if o.polish and max(r_prim, r_dual) < o.polish_trigger:
                        res = self._polish(x, z, y, q, l, u)
                        if res is not None:
                            x, y, r_prim, r_dual = res
                            solved = polished = True
                            break
                    if o.adapt_rho_every and it % o.adapt_rho_every == 0:
                        f = self._rescale(x, z, y, q, r_prim, r_dual)
                        if f > o.adapt_rho_factor or f < 1.0 / o.adapt_rho_factor:
                            # damped step: a full rebalance tends to overshoot and oscillate
                            step = min(max(np.sqrt(f), 0.1), 10.0)
                            scale = min(max(scale * step, 1e-6), 1e6)
                            rho = scale * self.rho
                            cho = self._factor(scale)
            if o.polish and not polished:
                res = self._polish(x, z, y, q, l, u)
                if res is not None and max(res[2], res[3]) <= max(r_prim, r_dual):
                    x, y, r_prim, r_dual = res
                    polished = True
                    solved = r_prim < o.eps and r_dual < o.eps
        if squeeze:
            x, y = x[:, 0], y[:, 0]
        return QpResult(x, y, it, r_prim, r_dual, solved, polished)

    def _polish(self, x, z, y, q, l, u):
        """Solve the equality-constrained problem on the guessed active set."""
        low = (z - l < -y) | self.eq_rows[:, None]
        upp = (u - z < y) & ~low
        active = low | upp
        bound = np.where(low, l, u)
        xs = np.empty_like(x)
        ys = np.zeros_like(y)
        for j in range(x.shape[1]):
            sol = self._polish_column(active[:, j], bound[:, j], q[:, j])
            if sol is None:
                return None
            xs[:, j], ys[:, j] = sol
        # accept only a KKT point: feasible, stationary, correctly signed multipliers
        Ax = self._Ax(xs)
        r_prim = float(np.max(np.maximum(l - Ax, 0.0) + np.maximum(Ax - u, 0.0)))
        r_dual = float(np.max(np.abs(self.P @ xs + q + self._ATy(ys))))
        tol = self.opts.eps
        bad_sign = np.any((low & ~self.eq_rows[:, None] & (ys > tol)) | (upp & (ys < -tol)))
        if r_prim >= tol or r_dual >= tol or bad_sign:
            return None
        return xs, ys, r_prim, r_dual

    def _polish_column(self, active, bound, q):
        n = self.n
        if self.A is None:
            key = active.tobytes()
            free = ~active
            x = np.empty(n)
            x[active] = bound[active]
            if free.any():
                fac = self._polish_cache.get(key)
                if fac is None:
                    try:
                        fac = linalg.cho_factor(self.P[np.ix_(free, free)])
                    except linalg.LinAlgError:
                        return None
                    self._polish_cache[key] = fac
                x[free] = linalg.cho_solve(fac, -q[free] - self.P[np.ix_(free, active)] @ x[active])
            y = np.zeros(n)
            y[active] = -(self.P[active] @ x + q[active])
            return x, y
        idx = np.flatnonzero(active)
        Aa = self.A[idx]
        k = len(idx)
        KKT = np.zeros((n + k, n + k))
        KKT[:n, :n] = self.P
        KKT[:n, n:] = Aa.T
        KKT[n:, :n] = Aa
        rhs = np.concatenate([-q, bound[idx]])
        sol, *_ = np.linalg.lstsq(KKT, rhs, rcond=None)
        y = np.zeros(self.m)
        y[idx] = sol[n:]
        return sol[:n], y


def qp_solve(P, q, A, l, u, opts: QpOptions | None = None, x0=None, y0=None) -> QpResult:
    """Solve one QP ``min 1/2 x'Px + q'x  s.t.  l <= Ax <= u``.

    ``A`` may have zero rows. Check ``result.success``; a failed solve still
    carries the last iterate.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    A = np.asarray(A, dtype=float).reshape(-1, n)
    l = np.asarray(l, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    ws = QpWorkspace(P, A, l == u, opts)
    return ws.solve(q, l, u, x0, y0)

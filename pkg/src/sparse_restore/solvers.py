"""Numerical engines: interference projector, CG least squares, BPDN and its
optimality certificate.

BPDN
----
``minimize ||x||_1  subject to  ||z - A x||_2 <= eta`` is solved by ADMM on
the split ``v = x, y = A x`` (``v`` carries the l1 term, ``y`` the ball
constraint).  The x-update inverts ``I + A^T A``, which does not depend on
the penalty, so the penalty can be adapted freely.  Periodically the
iterate's support is "polished": the KKT system restricted to the support
is solved in closed form and accepted only if the full certificate passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg as sla
from scipy.sparse.linalg import LinearOperator, cg

from .exceptions import InfeasibleBudget, SingularInterferenceSupport
from .model import RecoveryReport, SupportSet
from .operators import as_operator, scipy_operator

SINGULAR_COND = 1e12


@dataclass(frozen=True)
class SolverOptions:
    """Iteration controls shared by the solvers.

    ``rho`` is the initial ADMM penalty (``None`` picks one from the data);
    ``polish`` enables the support-restricted exact solve.
    """

    max_iterations: int = 10000
    tolerance: float = 1e-8
    rho: Optional[float] = None
    relaxation: float = 1.6
    polish: bool = True
    polish_every: int = 25
    polish_max_support: Optional[int] = None
    zero_init: bool = True

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.rho is not None and not self.rho > 0:
            raise ValueError("rho must be positive")
        if not 0 < self.relaxation < 2:
            raise ValueError("relaxation must lie in (0, 2)")


# -- projector -------------------------------------------------------------------

class Projector:
    """``R_E = I - B_E (B_E^T B_E)^{-1} B_E^T``, the orthogonal projector onto
    the complement of ``span(B_E)``."""

    def __init__(self, B, E: SupportSet):
        M = B.shape[0]
        self.B = B
        self.E = E
        self.shape = (M, M)
        self._mask = None
        self._BE = None
        self._chol = None
        idx = E.as_array()
        if idx.size == 0:
            return
        if idx.size > M:
            raise SingularInterferenceSupport(
                f"{idx.size} interference atoms cannot be independent in dimension {M}"
            )
        if getattr(B, "kind", None) == "identity":
            keep = np.ones(M, dtype=bool)
            keep[idx] = False
            self._mask = keep
            return
        BE = B.columns(idx)
        G = BE.T @ BE
        cond = np.linalg.cond(G)
        if not np.isfinite(cond) or cond > SINGULAR_COND:
            raise SingularInterferenceSupport(
                f"Gram matrix of the interference support has condition number {cond:.3g}"
            )
        self._BE = BE
        self._chol = sla.cho_factor(G)

    @property
    def is_identity(self) -> bool:
        return len(self.E) == 0

    def apply(self, v):
        v = np.asarray(v, dtype=float)
        if self.is_identity:
            return v.copy()
        if self._mask is not None:
            return v * self._mask
        return v - self._BE @ sla.cho_solve(self._chol, self._BE.T @ v)

    def apply_columns(self, V):
        V = np.asarray(V, dtype=float)
        if self.is_identity:
            return V.copy()
        if self._mask is not None:
            return V * self._mask[:, None]
        return V - self._BE @ sla.cho_solve(self._chol, self._BE.T @ V)

    matvec = apply
    rmatvec = apply


def build_projector(B, E: SupportSet) -> Projector:
    if E.n != B.shape[1]:
        raise ValueError(f"support over {E.n} atoms, B has {B.shape[1]}")
    return Projector(B, E)


# -- least squares ----------------------------------------------------------------

@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    converged: bool
    normal_residual: float


def cg_least_squares(op, rhs, opts: Optional[SolverOptions] = None) -> CGResult:
    """Least-squares solution of ``op x ~ rhs`` by CG on the normal equations.

    Stops once ``||op^T (rhs - op x)|| <= tolerance * ||op^T rhs||``; starts
    from zero.
    """
    opts = opts or SolverOptions(tolerance=1e-12)
    op = as_operator(op)
    rhs = np.asarray(rhs, dtype=float)
    n = op.shape[1]
    b = op.rmatvec(rhs)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return CGResult(np.zeros(n), 0, True, 0.0)
    normal = LinearOperator((n, n), matvec=lambda v: op.rmatvec(op.matvec(v)), dtype=float)
    count = [0]

    def _tick(_):
        count[0] += 1

    x, info = cg(normal, b, x0=np.zeros(n), rtol=opts.tolerance, atol=0.0,
                 maxiter=opts.max_iterations, callback=_tick)
    res = float(np.linalg.norm(b - op.rmatvec(op.matvec(x))))
    return CGResult(x, count[0], info == 0 and res <= opts.tolerance * bnorm * (1 + 1e-6), res)


def range_distance(A, z) -> float:
    """``min_x ||z - A x||_2``."""
    A = as_operator(A)
    if A.row_tight:
        return 0.0
    if A.gram_scale is not None:
        Pz = A.matvec(A.rmatvec(z)) / A.gram_scale
        return float(np.linalg.norm(z - Pz))
    if getattr(A, "explicit", False):
        mat = np.asarray(A.matrix)
        x = np.linalg.lstsq(mat, z, rcond=None)[0]
        return float(np.linalg.norm(z - mat @ x))
    res = cg_least_squares(A, z, SolverOptions(tolerance=1e-12, max_iterations=5000))
    return float(np.linalg.norm(z - A.matvec(res.x)))


# -- optimality certificate --------------------------------------------------------

@dataclass
class KKTReport:
    passed: bool
    feasibility: float
    stationarity: float
    slackness: float
    lam: float
    violations: list = field(default_factory=list)

    def as_dict(self):
        return {
            "passed": self.passed,
            "feasibility": self.feasibility,
            "stationarity": self.stationarity,
            "slackness": self.slackness,
            "lambda": self.lam,
            "violations": list(self.violations),
        }


def kkt_certificate(A, z, eta, x_hat, tol, dual=None) -> KKTReport:
    """First-order optimality check for the BPDN program.

    ``dual`` is a vector ``y`` with ``A^T y`` in the scaled subdifferential
    of ``||x_hat||_1``; it defaults to the residual ``r = z - A x_hat``,
    which is the right multiplier whenever the ball constraint is active.
    For ``eta = 0`` the residual vanishes and an explicit dual is required.

    Checks (all with ``scale = max(1, ||z||)``):

    * feasibility: ``||r|| <= eta + tol * scale``;
    * stationarity: with ``g = A^T y`` and ``lam = ||g||_inf``,
      ``g_i / lam = sign(x_i) +- tol`` on the support and
      ``|g_i| <= lam (1 + tol)`` off it;
    * slackness: a nonzero ``x_hat`` with ``eta > 0`` must sit on the
      boundary, ``eta - ||r|| <= tol * scale``.
    """
    A = as_operator(A)
    z = np.asarray(z, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    viol = []
    if not np.all(np.isfinite(x_hat)):
        return KKTReport(False, math.inf, math.inf, math.inf, math.nan, ["non-finite x_hat"])
    scale = max(1.0, float(np.linalg.norm(z)))
    r = z - A.matvec(x_hat)
    rnorm = float(np.linalg.norm(r))
    feas = max(0.0, rnorm - eta)
    if feas > tol * scale:
        viol.append(f"residual {rnorm:.3e} exceeds eta {eta:.3e}")
    y = r if dual is None else np.asarray(dual, dtype=float)
    g = A.rmatvec(y)
    lam = float(np.max(np.abs(g))) if g.size else 0.0
    support = x_hat != 0
    stat = 0.0
    if support.any():
        if lam == 0.0:
            stat = math.inf
            viol.append("zero multiplier with a nonzero solution")
        else:
            stat = float(np.max(np.abs(g[support] / lam - np.sign(x_hat[support]))))
            if stat > tol:
                viol.append(f"stationarity on support off by {stat:.3e}")
    if lam > 0.0 and (~support).any():
        off = float(np.max(np.abs(g[~support]))) / lam - 1.0
        if off > tol:
            viol.append(f"off-support correlation exceeds multiplier by {off:.3e}")
        stat = max(stat, off)
    slack = 0.0
    if support.any() and eta > 0:
        slack = max(0.0, eta - rnorm)
        if slack > tol * scale:
            viol.append(f"constraint inactive: eta - ||r|| = {slack:.3e}")
    return KKTReport(not viol, feas, max(stat, 0.0), slack, lam, viol)


# -- BPDN ----------------------------------------------------------------------

def _soft(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


class _NormalSolver:
    """Applies ``(I + A^T A)^{-1}``."""

    def __init__(self, A):
        self.A = A
        M, N = A.shape
        self.c = A.gram_scale
        self.dense = None
        if self.c is None and getattr(A, "explicit", False):
            mat = np.asarray(A.matrix)
            if M <= N:
                self.dense = ("rows", mat, sla.cho_factor(np.eye(M) + mat @ mat.T))
            else:
                self.dense = ("cols", mat, sla.cho_factor(np.eye(N) + mat.T @ mat))
        self._x0 = None

    def solve(self, q):
        A = self.A
        if self.c is not None:
            return q - A.rmatvec(A.matvec(q)) / (1.0 + self.c)
        if self.dense is not None:
            kind, mat, fac = self.dense
            if kind == "cols":
                return sla.cho_solve(fac, q)
            return q - mat.T @ sla.cho_solve(fac, mat @ q)
        n = A.shape[1]
        op = LinearOperator((n, n), matvec=lambda v: v + A.rmatvec(A.matvec(v)), dtype=float)
        x0 = np.zeros(n) if self._x0 is None else self._x0
        x, _ = cg(op, q, x0=x0, rtol=1e-12, atol=0.0, maxiter=500)
        self._x0 = x
        return x


def _project_ball(v, z, eta):
    if eta == 0.0:
        return z.copy()
    d = v - z
    nd = np.linalg.norm(d)
    if nd <= eta:
        return v
    return z + d * (eta / nd)


def _polish(A, z, eta, S, signs, y0, tol, max_rounds=8):
    """Solve the KKT system on a candidate support; return (x, dual) or None."""
    N = A.shape[1]
    S = np.asarray(S, dtype=int)
    s = np.asarray(signs, dtype=float)
    scale = max(1.0, float(np.linalg.norm(z)))
    for _ in range(max_rounds):
        if S.size == 0 or S.size > A.shape[0]:
            return None
        AS = A.columns(S)
        G = AS.T @ AS
        try:
            fac = sla.cho_factor(G)
        except np.linalg.LinAlgError:
            return None
        if np.linalg.cond(G) > SINGULAR_COND:
            return None
        xls = sla.cho_solve(fac, AS.T @ z)
        perp = z - AS @ xls
        pn2 = float(perp @ perp)
        if eta > 0:
            t = sla.cho_solve(fac, s)
            st = float(s @ t)
            if st <= 0 or eta * eta <= pn2:
                return None
            lam = math.sqrt((eta * eta - pn2) / st)
            xs = xls - lam * t
            y = (perp + lam * (AS @ t)) / lam
        else:
            if math.sqrt(pn2) > tol * scale:
                return None
            xs = xls
            if y0 is None:
                return None
            y = y0 + AS @ sla.cho_solve(fac, s - AS.T @ y0)
        flipped = np.sign(xs) != s
        g = A.rmatvec(y)
        off = np.ones(N, dtype=bool)
        off[S] = False
        gout = np.where(off, np.abs(g), 0.0)
        worst = int(np.argmax(gout))
        if not flipped.any() and gout[worst] <= 1.0 + tol:
            x = np.zeros(N)
            x[S] = xs
            return x, y
        # refine the active set and retry
        if flipped.any():
            keep = ~flipped
            S, s = S[keep], s[keep]
        else:
            pos = np.searchsorted(S, worst)
            S = np.insert(S, pos, worst)
            s = np.insert(s, pos, np.sign(g[worst]))
    return None


def bpdn(A, z, eta: float, opts: Optional[SolverOptions] = None) -> RecoveryReport:
    """Basis pursuit denoising, ``min ||x||_1`` s.t. ``||z - A x||_2 <= eta``.

    ``eta = 0`` gives basis pursuit.  Returns a report whose ``dual`` is a
    multiplier vector suitable for :func:`kkt_certificate`.

    Raises
    ------
    InfeasibleBudget
        If ``eta`` is smaller than the distance from ``z`` to ``range(A)``.
    """
    opts = opts or SolverOptions()
    A = as_operator(A)
    z = np.asarray(z, dtype=float)
    M, N = A.shape
    if z.shape != (M,):
        raise ValueError(f"z has shape {z.shape}, operator has {M} rows")
    if eta < 0:
        raise ValueError("eta must be non-negative")
    tol = opts.tolerance
    znorm = float(np.linalg.norm(z))
    if znorm <= eta:
        x = np.zeros(N)
        return RecoveryReport(x, znorm, 0, True, dual=z.copy(),
                              diagnostics={"polished": False, "trivial": True})
    dist = range_distance(A, z)
    if dist > eta + 1e-12 * max(1.0, znorm) and (eta > 0 or dist > 1e-10 * max(1.0, znorm)):
        raise InfeasibleBudget(eta, dist)

    solver = _NormalSolver(A)
    g0 = A.rmatvec(z)
    gmax = float(np.max(np.abs(g0)))
    rho = opts.rho if opts.rho is not None else 10.0 / max(gmax, 1e-300)
    alpha = opts.relaxation
    x = np.zeros(N)
    v = np.zeros(N)
    u = np.zeros(N)
    y = _project_ball(np.zeros(M), z, eta)
    w = np.zeros(M)
    polish_cap = opts.polish_max_support or M
    converged = False
    polished = False
    dual = None
    it = 0
    for it in range(1, opts.max_iterations + 1):
        x = solver.solve((v - u) + A.rmatvec(y - w))
        Ax = A.matvec(x)
        xr = alpha * x + (1 - alpha) * v
        Axr = alpha * Ax + (1 - alpha) * y
        v_old, y_old = v, y
        v = _soft(xr + u, 1.0 / rho)
        y = _project_ball(Axr + w, z, eta)
        u = u + xr - v
        w = w + Axr - y

        r_norm = math.sqrt(np.sum((x - v) ** 2) + np.sum((Ax - y) ** 2))
        dv = v - v_old
        s_norm = rho * math.sqrt(np.sum(dv ** 2) + np.sum(A.rmatvec(y - y_old) ** 2))
        p_scale = max(np.linalg.norm(x), np.linalg.norm(v), np.linalg.norm(Ax), np.linalg.norm(y), 1e-300)
        d_scale = rho * max(math.sqrt(np.sum(u ** 2) + np.sum(w ** 2)), 1e-300)

        if opts.polish and it % opts.polish_every == 0:
            S = np.flatnonzero(v)
            if 0 < S.size <= polish_cap:
                got = _polish(A, z, eta, S, np.sign(v[S]), -rho * w, tol)
                if got is not None:
                    cand, cdual = got
                    cert = kkt_certificate(A, z, eta, cand, tol, dual=cdual)
                    if cert.passed:
                        x, dual, polished, converged = cand, cdual, True, True
                        break

        if r_norm <= tol * p_scale and s_norm <= tol * d_scale:
            converged = True
            x = v.copy()
            break

        if it % 10 == 0:
            if r_norm * p_scale ** -1 > 10 * s_norm / d_scale:
                rho *= 2.0
                u, w = u / 2.0, w / 2.0
            elif s_norm / d_scale > 10 * r_norm / p_scale:
                rho /= 2.0
                u, w = u * 2.0, w * 2.0
    else:
        x = v.copy()

    if dual is None:
        dual = -rho * w
    resid = float(np.linalg.norm(z - A.matvec(x)))
    cert = kkt_certificate(A, z, eta, x, tol, dual=dual)
    diagnostics = {"polished": polished, "rho": rho, "kkt": cert.as_dict()}
    return RecoveryReport(x, resid, it, converged, dual=dual, diagnostics=diagnostics)

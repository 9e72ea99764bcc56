"""Recovery frontends for the three levels of support knowledge.

* direct restoration (both supports known): least squares on ``R_E A_X``;
* BP restoration (interference support known): BPDN on ``R_E A``;
* BP separation (nothing known): BPDN on ``[A B]``.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .dictionary import CoherenceProfile, concat, profile
from .exceptions import ConditionNotMet, DRSingular
from .guarantees import check_dr
from .model import (BothSupports, InterferenceSupport, NoSupport, RecoveryProblem,
                    RecoveryReport, SupportSet)
from .operators import Composed, DenseMap
from .solvers import SINGULAR_COND, SolverOptions, bpdn, build_projector, cg_least_squares


def best_k_support(x, k: int) -> SupportSet:
    """Indices of the ``k`` largest-magnitude entries (ties go to the lower index).

    This minimizes ``||x - x_S||_1`` over all supports of size ``k``.
    """
    x = np.asarray(x, dtype=float).ravel()
    N = x.size
    if k < 0 or k > N:
        raise ValueError(f"k={k} outside [0, {N}]")
    # stable sort on -|x| keeps lower indices first among equal magnitudes
    order = np.argsort(-np.abs(x), kind="stable")
    return SupportSet.from_indices(order[:k], N)


def detect_saturation_support(z, threshold: float) -> SupportSet:
    """Entries with ``|z_i| >= threshold`` (clipped samples)."""
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    z = np.asarray(z, dtype=float).ravel()
    return SupportSet.from_mask(np.abs(z) >= threshold)


def _expect(prob: RecoveryProblem, kind, what):
    if not isinstance(prob.knowledge, kind):
        raise ValueError(f"{what} needs {kind.__name__} knowledge, got {type(prob.knowledge).__name__}")


def direct_restore(prob: RecoveryProblem, *, override: bool = False,
                   coherence: Optional[CoherenceProfile] = None,
                   opts: Optional[SolverOptions] = None) -> RecoveryReport:
    """``x_X = (R_E A_X)^+ R_E z`` and zero elsewhere.

    Unless ``override`` is set the recovery condition for ``(|X|, |E|)`` is
    checked first (``coherence`` may be passed to skip recomputing it).
    """
    _expect(prob, BothSupports, "direct restoration")
    X = prob.knowledge.signal
    E = prob.knowledge.interference
    if not override:
        p = coherence or profile(prob.A, prob.B)
        rep = check_dr(len(X), len(E), p)
        if not rep.holds:
            raise ConditionNotMet(
                f"direct restoration condition fails: {rep.lhs:.6g} >= {rep.rhs:.6g}"
            )
    N = prob.A.shape[1]
    x_hat = np.zeros(N)
    R = build_projector(prob.B, E)
    Rz = R.apply(prob.z)
    if len(X) == 0:
        return RecoveryReport(x_hat, float(np.linalg.norm(Rz)), 0, True,
                              residual_projected=len(E) > 0)
    RAX = R.apply_columns(prob.A.columns(X.as_array()))
    sv = np.linalg.svd(RAX, compute_uv=False)
    if sv[-1] == 0.0 or sv[0] / sv[-1] > SINGULAR_COND:
        raise DRSingular(
            f"projected signal sub-dictionary is singular (condition {sv[0] / max(sv[-1], 1e-300):.3g})"
        )
    res = cg_least_squares(DenseMap(RAX), Rz, opts or SolverOptions(tolerance=1e-12))
    x_hat[X.as_array()] = res.x
    resid = float(np.linalg.norm(Rz - RAX @ res.x))
    return RecoveryReport(x_hat, resid, res.iterations, res.converged,
                          residual_projected=len(E) > 0,
                          diagnostics={"normal_residual": res.normal_residual})


def bp_restore(prob: RecoveryProblem, opts: Optional[SolverOptions] = None) -> RecoveryReport:
    """``min ||x||_1`` s.t. ``||R_E (z - A x)|| <= eta``."""
    _expect(prob, InterferenceSupport, "BP restoration")
    E = prob.knowledge.interference
    if len(E) == 0:
        return bpdn(prob.A, prob.z, prob.eta, opts)
    R = build_projector(prob.B, E)
    rep = bpdn(Composed(R, prob.A), R.apply(prob.z), prob.eta, opts)
    rep.residual_projected = True
    return rep


def bp_separate(prob: RecoveryProblem, opts: Optional[SolverOptions] = None) -> RecoveryReport:
    """``min ||w||_1`` s.t. ``||z - [A B] w|| <= eta``, split into ``(x_hat, e_hat)``."""
    _expect(prob, NoSupport, "BP separation")
    D = concat(prob.A, prob.B)
    rep = bpdn(D, prob.z, prob.eta, opts)
    Na = prob.A.shape[1]
    w = rep.x_hat
    rep.x_hat = w[:Na].copy()
    rep.e_hat = w[Na:].copy()
    rep.residual_l2 = float(np.linalg.norm(prob.z - prob.A.matvec(rep.x_hat) - prob.B.matvec(rep.e_hat)))
    return rep


def recover(prob: RecoveryProblem, opts: Optional[SolverOptions] = None, **kw) -> RecoveryReport:
    """Dispatch on the knowledge level of ``prob``."""
    if isinstance(prob.knowledge, BothSupports):
        return direct_restore(prob, opts=opts, **kw)
    if isinstance(prob.knowledge, InterferenceSupport):
        return bp_restore(prob, opts)
    return bp_separate(prob, opts)

"""Deterministic recovery conditions, RIC bounds and error-bound constants.

All conditions are strict inequalities ``lhs < rhs``.  Because the
inputs are floating point (``(1/sqrt(M))**2`` is not exactly ``1/M``), the
comparison requires ``lhs`` to undercut ``rhs`` by more than a relative
``STRICT_RTOL``; a boundary case that is an equality in exact arithmetic is
therefore reported as not holding.

Constants keep their conventional names ``C0, C1, C3, ..., C8`` (there is
no ``C2``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .dictionary import CoherenceProfile
from .exceptions import ConditionNotMet

STRICT_RTOL = 1e-12
RIP_DELTA = 0.307

CONDITIONS = ("classical", "dr", "bpres", "bpsep", "bpres_rip", "bpsep_rip")


@dataclass
class GuaranteeReport:
    """Outcome of one recovery-condition check.

    ``holds`` is ``lhs < rhs``; ``constants`` (error-bound constants keyed
    by name) is only populated when the condition holds.
    """

    condition_name: str
    holds: bool
    lhs: float
    rhs: float
    constants: Optional[dict] = None
    max_sparsity: Optional[int] = None
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "condition": self.condition_name,
            "holds": self.holds,
            "lhs": _json_float(self.lhs),
            "rhs": _json_float(self.rhs),
            "constants": self.constants,
            "max_sparsity": self.max_sparsity,
        }


def _json_float(v):
    return v if math.isfinite(v) else None


def _strict(lhs: float, rhs: float) -> bool:
    if math.isinf(rhs):
        return rhs > 0 and not math.isinf(lhs)
    return lhs < rhs - STRICT_RTOL * max(abs(rhs), abs(lhs))


def _pos(x: float) -> float:
    return x if x > 0.0 else 0.0


def _check_count(name, v):
    if int(v) != v or v < 0:
        raise ValueError(f"{name} must be a non-negative integer, got {v!r}")
    return int(v)


def _ordered(p: CoherenceProfile):
    """(mu_a, mu_b) with mu_b <= mu_a; the separation bounds are stated that way."""
    return (p.mu_a, p.mu_b) if p.mu_b <= p.mu_a else (p.mu_b, p.mu_a)


# -- building blocks -------------------------------------------------------------

def f_uv(u: int, v: int, mu_a: float, mu_b: float) -> float:
    """``[1 - mu_a (u-1)]_+ [1 - mu_b (v-1)]_+``.

    Note that the value exceeds 1 when ``u == 0`` or ``v == 0`` (a factor
    becomes ``1 + mu``).
    """
    u = _check_count("u", u)
    v = _check_count("v", v)
    return _pos(1.0 - mu_a * (u - 1)) * _pos(1.0 - mu_b * (v - 1))


def classical_threshold(mu_a: float) -> float:
    """Strict upper bound ``(1 + 1/mu_a) / 2`` on the sparsity; ``inf`` if ``mu_a == 0``."""
    if mu_a <= 0.0:
        return math.inf
    return 0.5 * (1.0 + 1.0 / mu_a)


def bpsep_threshold(p: CoherenceProfile) -> float:
    mu_a, _ = _ordered(p)
    if p.mu_d == 0.0:
        return math.inf
    s = math.sqrt(mu_a * mu_a + p.mu_m * p.mu_m)
    t1 = 2.0 * (1.0 + mu_a) / (mu_a + 2.0 * p.mu_d + s)
    t2 = (1.0 + p.mu_d) / (2.0 * p.mu_d)
    return max(t1, t2)


def bpres_rip_threshold(ne: int, p: CoherenceProfile) -> float:
    ne = _check_count("ne", ne)
    g = _pos(1.0 - p.mu_b * (ne - 1))
    den = p.mu_a * g + ne * p.mu_m ** 2
    num = (RIP_DELTA + p.mu_a) * g
    if den == 0.0:
        return math.inf if num > 0 else 0.0
    return num / den


def bpsep_rip_threshold(p: CoherenceProfile) -> float:
    mu_a, _ = _ordered(p)
    if p.mu_d == 0.0:
        return math.inf
    s = math.sqrt(mu_a * mu_a + p.mu_m * p.mu_m)
    t1 = 2.0 * (RIP_DELTA + mu_a) / (mu_a + s)
    t2 = 1.0 + RIP_DELTA / p.mu_d
    return max(t1, t2)


# -- RIC bounds ------------------------------------------------------------------

def ric_bound_projected(nx: int, ne: int, p: CoherenceProfile) -> float:
    """Upper bound on the RIC of ``R_E A`` for ``nx``-sparse vectors, ``|E| = ne``."""
    nx = _check_count("nx", nx)
    ne = _check_count("ne", ne)
    if nx < 1:
        raise ValueError("nx must be >= 1")
    base = p.mu_a * (nx - 1)
    if ne == 0:
        return base
    g = _pos(1.0 - p.mu_b * (ne - 1))
    if g == 0.0:
        return math.inf
    return base + nx * ne * p.mu_m ** 2 / g


def _ric_concat_branches(w: int, p: CoherenceProfile):
    mu_a, _ = _ordered(p)
    b1 = 0.5 * (mu_a * (w - 2) + w * math.sqrt(mu_a * mu_a + p.mu_m * p.mu_m))
    b2 = p.mu_d * (w - 1)
    return b1, b2


def ric_bound_concat(w: int, p: CoherenceProfile) -> float:
    """Upper bound on the RIC of ``D = [A B]`` for ``w``-sparse vectors."""
    w = _check_count("w", w)
    if w < 1:
        raise ValueError("w must be >= 1")
    return min(_ric_concat_branches(w, p))


# -- conditions ------------------------------------------------------------------

def check_classical(nx: int, mu_a: float) -> GuaranteeReport:
    nx = _check_count("nx", nx)
    lhs, rhs = float(nx), classical_threshold(mu_a)
    rep = GuaranteeReport("classical", _strict(lhs, rhs), lhs, rhs)
    if rep.holds:
        c0, c1 = bpdn_error_constants(nx, mu_a)
        rep.constants = {"C0": c0, "C1": c1}
    return rep


def check_dr(nx: int, ne: int, p: CoherenceProfile) -> GuaranteeReport:
    nx = _check_count("nx", nx)
    ne = _check_count("ne", ne)
    lhs = nx * ne * p.mu_m ** 2
    rhs = f_uv(nx, ne, p.mu_a, p.mu_b)
    rep = GuaranteeReport("dr", _strict(lhs, rhs), lhs, rhs)
    if rep.holds:
        c3, c4 = _dr_constants(nx, ne, p)
        rep.constants = {"C3": c3, "C4": c4}
    return rep


def check_bpres(nx: int, ne: int, p: CoherenceProfile) -> GuaranteeReport:
    nx = _check_count("nx", nx)
    ne = _check_count("ne", ne)
    lhs = 2 * nx * ne * p.mu_m ** 2
    rhs = f_uv(2 * nx, ne, p.mu_a, p.mu_b)
    rep = GuaranteeReport("bpres", _strict(lhs, rhs), lhs, rhs)
    if rep.holds:
        c5, c6 = _bpres_constants(nx, ne, p)
        rep.constants = {"C5": c5, "C6": c6}
    return rep


def check_bpsep(w: int, p: CoherenceProfile) -> GuaranteeReport:
    w = _check_count("w", w)
    lhs, rhs = float(w), bpsep_threshold(p)
    rep = GuaranteeReport("bpsep", _strict(lhs, rhs), lhs, rhs)
    if rep.holds:
        c7, c8, details = _bpsep_constants(w, p)
        rep.constants = {"C7": c7, "C8": c8}
        rep.details = details
    return rep


def check_bpres_rip(nx: int, ne: int, p: CoherenceProfile) -> GuaranteeReport:
    nx = _check_count("nx", nx)
    lhs, rhs = float(nx), bpres_rip_threshold(ne, p)
    return GuaranteeReport("bpres_rip", _strict(lhs, rhs), lhs, rhs)


def check_bpsep_rip(w: int, p: CoherenceProfile) -> GuaranteeReport:
    w = _check_count("w", w)
    lhs, rhs = float(w), bpsep_rip_threshold(p)
    return GuaranteeReport("bpsep_rip", _strict(lhs, rhs), lhs, rhs)


# -- error constants -------------------------------------------------------------

def bpdn_error_constants(nx: int, mu_a: float):
    """``(C0, C1)`` of the BPDN bound ``||x - x_hat|| <= C0 (eps + eta) + C1 ||x - x_X||_1``."""
    nx = _check_count("nx", nx)
    if not _strict(mu_a * (2 * nx - 1), 1.0):
        raise ConditionNotMet(f"nx={nx} violates the coherence threshold for mu_a={mu_a:.6g}")
    c = 1.0 - mu_a * (2 * nx - 1)
    c0 = (c + 2.0 * math.sqrt(mu_a * nx) * math.sqrt(1.0 + mu_a * (nx - 1))) / (
        math.sqrt(1.0 + mu_a) * c
    )
    c1 = 2.0 * math.sqrt(mu_a + mu_a * mu_a) / c
    return c0, c1


def dr_error_constants(nx: int, ne: int, p: CoherenceProfile):
    """``(C3, C4)`` of the direct-restoration bound ``C3 eps + C4 ||x - x_X||_1``."""
    if not check_dr(nx, ne, p).holds:
        raise ConditionNotMet(f"direct restoration condition fails at nx={nx}, ne={ne}")
    return _dr_constants(nx, ne, p)


def _dr_constants(nx, ne, p):
    g = _pos(1.0 - p.mu_b * (ne - 1))
    num = math.sqrt(nx) * (g + ne * p.mu_m)
    den = (1.0 - p.mu_a * (nx - 1)) * g - nx * ne * p.mu_m ** 2
    c = num / den
    return c, c + 1.0


def bpres_error_constants(nx: int, ne: int, p: CoherenceProfile):
    """``(C5, C6)`` of the BP-restoration bound ``C5 (eps + eta) + C6 ||x - x_X||_1``."""
    if not check_bpres(nx, ne, p).holds:
        raise ConditionNotMet(f"BP restoration condition fails at nx={nx}, ne={ne}")
    return _bpres_constants(nx, ne, p)


def _bpres_constants(nx, ne, p):
    if ne == 0:
        extra = 0.0
    else:
        extra = ne * p.mu_m ** 2 / _pos(1.0 - p.mu_b * (ne - 1))
    a = p.mu_a + extra
    delta = p.mu_a * (nx - 1) + nx * extra
    c = 1.0 - p.mu_a * (2 * nx - 1) - 2 * nx * extra
    c5 = (c + 2.0 * math.sqrt(a * nx) * math.sqrt(1.0 + delta)) / (math.sqrt(1.0 + p.mu_a) * c)
    c6 = 2.0 * math.sqrt(a) * math.sqrt(1.0 + p.mu_a) / c
    return c5, c6


def bpsep_error_constants(w: int, p: CoherenceProfile):
    """``(C7, C8)`` of the BP-separation bound ``C7 (eps + eta) + C8 ||w - w_W||_1``."""
    if not check_bpsep(w, p).holds:
        raise ConditionNotMet(f"BP separation condition fails at w={w}")
    c7, c8, _ = _bpsep_constants(w, p)
    return c7, c8


def _bpsep_constants(w, p):
    # With delta_w the smaller RIC bound and d = 1 - delta_w - mu_d w, one
    # closed form covers both branches; for the mu_d (w - 1) branch it is
    # the BPDN constant pair with mu_a -> mu_d, nx -> w.
    mu_d = p.mu_d
    if w == 0:
        b1, b2 = 0.0, 0.0
        delta = 0.0
    else:
        b1, b2 = _ric_concat_branches(w, p)
        delta = min(b1, b2)
    d = 1.0 - delta - mu_d * w
    c7 = (d + 2.0 * math.sqrt(mu_d * w) * math.sqrt(1.0 + delta)) / (math.sqrt(1.0 + mu_d) * d)
    c8 = 2.0 * math.sqrt(mu_d) * (d + 2.0 * mu_d * w) / (math.sqrt(1.0 + mu_d) * d)
    details = {"branch": 1 if b1 <= b2 else 2, "delta_w": delta, "d": d}
    return c7, c8, details


# -- integer scans ---------------------------------------------------------------

_SCAN_LIMIT = 1 << 40


def _predicate(condition: str, fixed: int, p: CoherenceProfile):
    if condition == "classical":
        return lambda k: check_classical(k, p.mu_a).holds
    if condition == "dr":
        return lambda k: check_dr(k, fixed, p).holds
    if condition == "bpres":
        return lambda k: check_bpres(k, fixed, p).holds
    if condition == "bpres_rip":
        return lambda k: check_bpres_rip(k, fixed, p).holds
    if condition == "bpsep":
        return lambda k: check_bpsep(k, p).holds
    if condition == "bpsep_rip":
        return lambda k: check_bpsep_rip(k, p).holds
    raise ValueError(f"unknown condition {condition!r}; expected one of {CONDITIONS}")


def max_sparsity(condition: str, fixed: int, p: CoherenceProfile, limit: int = _SCAN_LIMIT) -> int:
    """Largest integer sparsity satisfying ``condition`` (0 if none).

    ``fixed`` is ``ne`` for the restoration conditions and ignored for the
    separation ones.  Every condition is monotone in the sparsity, so the
    strict predicate is scanned by doubling then bisection.  Returns
    ``limit`` if the condition holds all the way up to it (e.g. ``mu = 0``).
    """
    ok = _predicate(condition, fixed, p)
    if not ok(1):
        return 0
    lo, hi = 1, 2
    while hi < limit and ok(hi):
        lo, hi = hi, min(2 * hi, limit)
    if hi >= limit and ok(limit):
        return limit
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass
class ConditionCurves:
    """Max sparsities per interference size plus the separation limits."""

    rows: list
    separation: dict

    header = ("ne", "dr", "bpres", "bpres_rip")


def condition_curves(p: CoherenceProfile, ne_max: int) -> ConditionCurves:
    if ne_max < 1:
        raise ValueError("ne_max must be >= 1")
    rows = []
    for ne in range(1, ne_max + 1):
        rows.append((
            ne,
            max_sparsity("dr", ne, p),
            max_sparsity("bpres", ne, p),
            max_sparsity("bpres_rip", ne, p),
        ))
    sep = {
        "bpsep": max_sparsity("bpsep", 0, p),
        "bpsep_rip": max_sparsity("bpsep_rip", 0, p),
    }
    return ConditionCurves(rows, sep)


def analyze(p: CoherenceProfile, nx: Optional[int] = None, ne: Optional[int] = None,
            w: Optional[int] = None) -> dict:
    """All checks and sparsity limits for one profile, as plain data."""
    out = {"profile": p.as_dict()}
    ne_ref = 1 if ne is None else ne
    out["max_sparsity"] = {
        "classical": max_sparsity("classical", 0, p),
        "dr": max_sparsity("dr", ne_ref, p),
        "bpres": max_sparsity("bpres", ne_ref, p),
        "bpres_rip": max_sparsity("bpres_rip", ne_ref, p),
        "bpsep": max_sparsity("bpsep", 0, p),
        "bpsep_rip": max_sparsity("bpsep_rip", 0, p),
        "ne": ne_ref,
    }
    checks = {}
    if nx is not None:
        checks["classical"] = check_classical(nx, p.mu_a).as_dict()
    if nx is not None and ne is not None:
        checks["dr"] = check_dr(nx, ne, p).as_dict()
        checks["bpres"] = check_bpres(nx, ne, p).as_dict()
        checks["bpres_rip"] = check_bpres_rip(nx, ne, p).as_dict()
    if w is not None:
        checks["bpsep"] = check_bpsep(w, p).as_dict()
        checks["bpsep_rip"] = check_bpsep_rip(w, p).as_dict()
    out["checks"] = checks
    return out

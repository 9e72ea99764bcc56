"""Fixed-seed experiments: exact recovery, stability bounds, declicking and
inpainting.  Shared by the CLI ``experiment`` command and the test suite."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Optional

import numpy as np

from . import guarantees as G
from .dictionary import build_dct, build_identity, concat, profile
from .mediaio import AudioSignal, GrayImage, write_indices, write_pgm, write_wav
from .model import (BothSupports, InterferenceSupport, NoSupport, RecoveryProblem,
                    SupportSet, synthesize)
from .pipeline import (corrupt_gaussian, corrupt_impulse, declick, inpaint_image,
                       make_scratch_mask, mse_db, scratch, synthetic_audio,
                       synthetic_image)
from .recovery import best_k_support, bp_restore, bp_separate, direct_restore
from .solvers import SolverOptions, bpdn, kkt_certificate

SCENARIOS = ("declick", "inpaint", "exact-recovery")

# Sparsity levels on the 64-point DCT / identity pair.  mu_m there is
# max|DCT entry| ~ 0.17672, so mu_m^2 ~ 0.031231 and:
#   direct restoration   nx*ne*mu_m^2 < 1      -> (4, 8): 0.99939
#   BP restoration     2*nx*ne*mu_m^2 < 1      -> (3, 5): 0.93692
#   BP separation      w < 2 / (3 mu_d) ~ 3.77 -> w = 3
EXACT_M = 64
EXACT_LEVELS = {"dr": (4, 8), "bpres": (3, 5), "bpsep": (3,)}

DECLICK_ETA = {"dr": 0.0, "bpres": 0.9, "bpsep": 0.9}


def _pair(M=EXACT_M):
    return build_dct(M), build_identity(M)


def _random_support(rng, n, k):
    return SupportSet.from_indices(rng.choice(n, size=k, replace=False), n)


def _values(rng, k):
    # bounded away from zero so supports are unambiguous
    return rng.choice([-1.0, 1.0], size=k) * (0.5 + rng.random(k))


def exact_trial(method: str, rng, A=None, B=None, opts: Optional[SolverOptions] = None) -> dict:
    """One noiseless, perfectly sparse trial at the level in ``EXACT_LEVELS``."""
    if A is None:
        A, B = _pair()
    M, Na = A.shape
    Nb = B.shape[1]
    x = np.zeros(Na)
    e = np.zeros(Nb)
    if method == "bpsep":
        (w,) = EXACT_LEVELS["bpsep"]
        W = _random_support(rng, Na + Nb, w).as_array()
        wv = np.zeros(Na + Nb)
        wv[W] = _values(rng, w)
        x, e = wv[:Na], wv[Na:]
    else:
        nx, ne = EXACT_LEVELS[method]
        X = _random_support(rng, Na, nx)
        E = _random_support(rng, Nb, ne)
        x[X.as_array()] = _values(rng, nx)
        e[E.as_array()] = _values(rng, ne)
    z = synthesize(A, x, B, e, np.zeros(M))
    kkt = None
    if method == "dr":
        rep = direct_restore(RecoveryProblem(z, A, B, 0.0, knowledge=BothSupports(X, E)))
        err = float(np.linalg.norm(x - rep.x_hat))
        tol = 1e-8
    elif method == "bpres":
        rep = bp_restore(RecoveryProblem(z, A, B, 0.0, knowledge=InterferenceSupport(E)), opts)
        err = float(np.linalg.norm(x - rep.x_hat))
        tol = 1e-6
        kkt = _kkt_bpres(A, B, E, z, 0.0, rep, opts)
    else:
        rep = bp_separate(RecoveryProblem(z, A, B, 0.0), opts)
        err = float(np.linalg.norm(np.concatenate([x - rep.x_hat, e - rep.e_hat])))
        tol = 1e-6
        kkt = _kkt_bpsep(A, B, z, 0.0, rep, opts)
    return {"method": method, "error": err, "success": err <= tol, "kkt": kkt}


def _kkt_bpres(A, B, E, z, eta, rep, opts):
    from .operators import Composed
    from .solvers import build_projector
    R = build_projector(B, E)
    tol = (opts or SolverOptions()).tolerance
    return kkt_certificate(Composed(R, A), R.apply(z), eta, rep.x_hat, tol, dual=rep.dual).passed


def _kkt_bpsep(A, B, z, eta, rep, opts):
    tol = (opts or SolverOptions()).tolerance
    w = np.concatenate([rep.x_hat, rep.e_hat])
    return kkt_certificate(concat(A, B), z, eta, w, tol, dual=rep.dual).passed


def exact_recovery(seed: int, trials: int = 100) -> dict:
    A, B = _pair()
    out = {}
    for k, method in enumerate(("dr", "bpres", "bpsep")):
        rng = np.random.default_rng([seed, k])
        res = [exact_trial(method, rng, A, B) for _ in range(trials)]
        out[method] = {
            "levels": list(EXACT_LEVELS[method]),
            "trials": trials,
            "successes": int(sum(r["success"] for r in res)),
            "max_error": max(r["error"] for r in res),
            "kkt_passed": None if method == "dr" else int(sum(bool(r["kkt"]) for r in res)),
        }
    return out


# -- stability ---------------------------------------------------------------------

def approx_sparse(rng, n, k, tail=0.05, ratio=0.7):
    """``k`` dominant entries plus a geometric tail ``tail * ratio**j`` on the rest."""
    x = np.zeros(n)
    S = rng.choice(n, size=k, replace=False)
    x[S] = _values(rng, k)
    rest = np.setdiff1d(np.arange(n), S)
    rng.shuffle(rest)
    x[rest] = rng.choice([-1.0, 1.0], size=rest.size) * tail * ratio ** np.arange(rest.size)
    return x


def _noise(rng, M, eps):
    n = rng.standard_normal(M)
    return n * (eps / np.linalg.norm(n))


def stability_trial(method: str, rng, eps: float = 0.05, A=None, B=None,
                    opts: Optional[SolverOptions] = None) -> dict:
    """One noisy trial; returns the error, the theoretical bound and KKT status."""
    if A is None:
        A, B = _pair()
    p = profile(A, B)
    M, Na = A.shape
    Nb = B.shape[1]
    n = _noise(rng, M, eps)
    eta = eps
    kkt = None
    if method == "bpdn":
        D = concat(A, B)
        nx = EXACT_LEVELS["bpsep"][0]
        w = approx_sparse(rng, Na + Nb, nx)
        z = D.matvec(w) + n
        rep = bpdn(D, z, eta, opts)
        X = best_k_support(w, nx)
        tail = float(np.abs(w).sum() - np.abs(w[X.as_array()]).sum())
        c0, c1 = G.bpdn_error_constants(nx, p.mu_d)
        err = float(np.linalg.norm(w - rep.x_hat))
        bound = c0 * (eps + eta) + c1 * tail
        tol = (opts or SolverOptions()).tolerance
        kkt = kkt_certificate(D, z, eta, rep.x_hat, tol, dual=rep.dual).passed
    elif method in ("dr", "bpres"):
        nx, ne = EXACT_LEVELS[method]
        x = approx_sparse(rng, Na, nx)
        E = _random_support(rng, Nb, ne)
        e = np.zeros(Nb)
        e[E.as_array()] = _values(rng, ne)
        z = synthesize(A, x, B, e, n)
        X = best_k_support(x, nx)
        tail = float(np.abs(x).sum() - np.abs(x[X.as_array()]).sum())
        if method == "dr":
            rep = direct_restore(RecoveryProblem(z, A, B, eta, eps, BothSupports(X, E)))
            c3, c4 = G.dr_error_constants(nx, ne, p)
            bound = c3 * eps + c4 * tail
        else:
            rep = bp_restore(RecoveryProblem(z, A, B, eta, eps, InterferenceSupport(E)), opts)
            c5, c6 = G.bpres_error_constants(nx, ne, p)
            bound = c5 * (eps + eta) + c6 * tail
            kkt = _kkt_bpres(A, B, E, z, eta, rep, opts)
        err = float(np.linalg.norm(x - rep.x_hat))
    elif method == "bpsep":
        (wk,) = EXACT_LEVELS["bpsep"]
        w = approx_sparse(rng, Na + Nb, wk)
        z = synthesize(A, w[:Na], B, w[Na:], n)
        rep = bp_separate(RecoveryProblem(z, A, B, eta, eps), opts)
        what = np.concatenate([rep.x_hat, rep.e_hat])
        W = best_k_support(w, wk)
        tail = float(np.abs(w).sum() - np.abs(w[W.as_array()]).sum())
        c7, c8 = G.bpsep_error_constants(wk, p)
        err = float(np.linalg.norm(w - what))
        bound = c7 * (eps + eta) + c8 * tail
        kkt = _kkt_bpsep(A, B, z, eta, rep, opts)
    else:
        raise ValueError(f"unknown method {method!r}")
    return {"method": method, "error": err, "bound": bound, "holds": err <= bound, "kkt": kkt}


# -- pipelines -------------------------------------------------------------------

def declick_experiment(seed: int, length: int = 65536, threads: int = 1,
                       out_dir: Optional[Path] = None, methods=("dr", "bpres", "bpsep")) -> dict:
    y = synthetic_audio(length, 192, seed=seed)
    yn = corrupt_gaussian(y, -30.0, seed + 1)
    z, E = corrupt_impulse(yn, 0.1, 0.1, seed + 2)
    report = {"length": length, "clicks": len(E), "mse_corrupted": mse_db(y, z), "methods": {}}
    restored = {}
    for m in methods:
        out, info = declick(z, m, eta=DECLICK_ETA[m], click_support=None if m == "bpsep" else E,
                            threads=threads, on_warning=lambda w: None)
        restored[m] = out.samples
        mse = mse_db(y, out.samples)
        report["methods"][m] = {
            "eta": DECLICK_ETA[m],
            "mse": mse,
            "improvement_db": report["mse_corrupted"] - mse,
            "failed_blocks": len(info["warnings"]),
        }
    r = report["methods"]
    if all(k in r for k in ("dr", "bpres", "bpsep")):
        report["ordering_ok"] = bool(
            r["dr"]["mse"] <= r["bpres"]["mse"] + 0.5 <= r["bpsep"]["mse"] + 1.0
        )
    if out_dir is not None:
        write_wav(out_dir / "clean.wav", AudioSignal(y))
        write_wav(out_dir / "corrupted.wav", AudioSignal(z))
        write_indices(out_dir / "clicks.txt", E)
        for m, s in restored.items():
            write_wav(out_dir / f"restored_{m}.wav", AudioSignal(s))
    return report


def inpaint_experiment(seed: int, size: int = 64, coverage: float = 0.15,
                       out_dir: Optional[Path] = None) -> dict:
    img = synthetic_image(size, size, seed=seed)
    mask = make_scratch_mask(size, size, coverage, seed + 1)
    z = scratch(img, mask)
    report = {"size": size, "coverage": len(mask) / (size * size),
              "mse_corrupted": mse_db(img, z), "methods": {}}
    outs = {}
    for m in ("bpres", "bpsep"):
        out, rep = inpaint_image(z, mask if m == "bpres" else None, m, 0.0)
        outs[m] = out
        mse = mse_db(img, out.pixels)
        report["methods"][m] = {"mse": mse, "improvement_db": report["mse_corrupted"] - mse,
                                "iterations": rep.iterations}
    report["bpres_beats_bpsep"] = bool(
        report["methods"]["bpres"]["mse"] < report["methods"]["bpsep"]["mse"]
    )
    if out_dir is not None:
        write_pgm(out_dir / "clean.pgm", GrayImage(img))
        write_pgm(out_dir / "corrupted.pgm", GrayImage(z))
        mimg = np.zeros(size * size)
        mimg[mask.as_array()] = 1.0
        write_pgm(out_dir / "mask.pgm", GrayImage(mimg.reshape(size, size)))
        for m, out in outs.items():
            write_pgm(out_dir / f"restored_{m}.pgm", out)
    return report


def _clean(obj):
    """JSON-safe copy: non-finite floats become null."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(report) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"


def run_experiment(scenario: str, seed: int, out_dir=None, *, length: int = 65536,
                   threads: int = 1) -> dict:
    """Run a named scenario; writes ``report.json`` (and media) into ``out_dir``."""
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    if scenario == "declick":
        body = declick_experiment(seed, length, threads, out)
        ok = body.get("ordering_ok", True) and body["methods"]["dr"]["improvement_db"] >= 10.0
    elif scenario == "inpaint":
        body = inpaint_experiment(seed, out_dir=out)
        ok = body["bpres_beats_bpsep"] and body["methods"]["bpres"]["improvement_db"] >= 8.0
    else:
        body = exact_recovery(seed)
        ok = all(v["successes"] == v["trials"] for v in body.values())
    report = {"scenario": scenario, "seed": seed, "passed": bool(ok), "results": body}
    if out is not None:
        (out / "report.json").write_text(dumps(report))
    return report

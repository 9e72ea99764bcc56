"""``sparse-restore`` command line.

Machine-readable JSON goes to stdout, human summaries to stderr.  Exit
codes: 0 success, 2 usage or input error, 3 numerical or invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import guarantees as G
from .dictionary import CoherenceProfile, from_spec, profile
from .exceptions import DimensionMismatch, InvalidDictionary, SparseRestoreError
from .experiments import SCENARIOS, dumps, run_experiment
from .mediaio import (MediaFormatError, read_mask, read_pgm, read_wav, to_pcm16,
                      write_pgm, write_wav)
from .pipeline import METHODS, declick, inpaint_image, mse_db

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class InputError(Exception):
    """Bad file, spec or argument detected after parsing."""


def _json_out(obj):
    sys.stdout.write(dumps(obj))


def _say(msg):
    sys.stderr.write(msg + "\n")


def _parse_profile(text):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise InputError(f"malformed profile {text!r}") from exc
    if len(vals) != 3:
        raise InputError("profile must be mu_a,mu_b,mu_m")
    try:
        return CoherenceProfile.from_values(*vals)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _default_threads():
    raw = os.environ.get("SPARSE_RESTORE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# -- commands --------------------------------------------------------------------

def cmd_analyze(args):
    if args.profile:
        p = _parse_profile(args.profile)
        source = {"profile": args.profile}
    else:
        if len(args.dicts) != 2:
            raise InputError("analyze needs two dictionaries (or --profile)")
        try:
            A, B = (from_spec(s) for s in args.dicts)
            p = profile(A, B)
        except (InvalidDictionary, DimensionMismatch, OSError) as exc:
            raise InputError(str(exc)) from exc
        source = {"A": args.dicts[0], "B": args.dicts[1], "shape_a": list(A.shape),
                  "shape_b": list(B.shape)}
    out = G.analyze(p, args.nx, args.ne, args.w)
    out["source"] = source
    _json_out(out)
    ms = out["max_sparsity"]
    _say(f"mu_a={p.mu_a:.6g} mu_b={p.mu_b:.6g} mu_m={p.mu_m:.6g} mu_d={p.mu_d:.6g}; "
         f"max nx at ne={ms['ne']}: dr={ms['dr']} bpres={ms['bpres']}; max w: bpsep={ms['bpsep']}")
    return EXIT_OK


def cmd_curves(args):
    p = _parse_profile(args.profile)
    if args.ne_max < 1:
        raise InputError("--ne-max must be >= 1")
    curves = G.condition_curves(p, args.ne_max)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "curves.csv", "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(G.ConditionCurves.header)
            wr.writerows(curves.rows)
        with open(out / "w_conditions.csv", "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(("condition", "max_w"))
            for k, v in curves.separation.items():
                wr.writerow((k, v))
    except OSError as exc:
        raise InputError(f"cannot write to {out}: {exc}") from exc
    _json_out({"profile": p.as_dict(), "rows": len(curves.rows),
               "first_row": list(curves.rows[0]), "separation": curves.separation,
               "files": [str(out / "curves.csv"), str(out / "w_conditions.csv")]})
    _say(f"wrote {len(curves.rows)} rows to {out / 'curves.csv'}")
    return EXIT_OK


def _summary_mse(ref, before, after):
    if ref is None:
        return {}
    return {"mse_before": mse_db(ref, before), "mse_after": mse_db(ref, after)}


def cmd_declick(args):
    try:
        sig = read_wav(args.inp)
        ref = read_wav(args.reference).samples if args.reference else None
        L = sig.samples.size
        if ref is not None and ref.size != L:
            raise InputError("reference length differs from input")
        clicks = None
        if args.clicks == "auto":
            clicks = "auto"
        elif args.clicks:
            clicks = read_mask(args.clicks, L)
    except (MediaFormatError, OSError) as exc:
        raise InputError(str(exc)) from exc
    if args.method in ("dr", "bpres") and clicks is None:
        raise InputError(f"--clicks is required for method {args.method}")
    warn = []
    out, info = declick(sig, args.method, eta=args.eta, dct_band=args.dct_band,
                        click_support=clicks, auto_threshold=args.auto_threshold,
                        threads=args.threads, on_warning=lambda w: (warn.append(w), _say(json.dumps(w))))
    try:
        write_wav(args.out, out)
    except OSError as exc:
        raise InputError(str(exc)) from exc
    summary = {"method": args.method, "eta": args.eta, "samples": L, "blocks": info["blocks"],
               "failed_blocks": len(warn)}
    # MSE of what was written, i.e. after 16-bit quantization
    summary.update(_summary_mse(ref, sig.samples, to_pcm16(out.samples) / 32768.0))
    _json_out(summary)
    _say(f"declick/{args.method}: {info['blocks']} blocks, {len(warn)} failed")
    return EXIT_NUMERIC if warn else EXIT_OK


def cmd_inpaint(args):
    try:
        img = read_pgm(args.inp)
        ref = read_pgm(args.reference).pixels if args.reference else None
        n = img.pixels.size
        if args.mask == "auto" or args.mask is None:
            mask = args.mask
        else:
            mask = read_mask(args.mask, n)
    except (MediaFormatError, OSError) as exc:
        raise InputError(str(exc)) from exc
    if args.method == "bpres" and mask is None:
        raise InputError("--mask is required for method bpres")
    try:
        out, rep = inpaint_image(img, mask, args.method, args.eta)
    except SparseRestoreError:
        raise
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    try:
        write_pgm(args.out, out)
    except OSError as exc:
        raise InputError(str(exc)) from exc
    summary = {"method": args.method, "eta": args.eta, "shape": list(img.shape),
               "iterations": rep.iterations, "converged": rep.converged}
    if ref is not None:
        written = np.floor(np.clip(out.pixels, 0.0, 1.0) * 255.0 + 0.5) / 255.0
        summary.update(_summary_mse(ref, img.pixels, written))
    _json_out(summary)
    _say(f"inpaint/{args.method}: {rep.iterations} iterations")
    return EXIT_OK


def cmd_experiment(args):
    if args.scenario not in SCENARIOS:
        raise InputError(f"unknown scenario {args.scenario!r}; choose from {', '.join(SCENARIOS)}")
    if args.length < 1:
        raise InputError("--length must be >= 1")
    report = run_experiment(args.scenario, args.seed, args.out, length=args.length,
                            threads=args.threads)
    _json_out(report)
    _say(f"experiment {args.scenario}: {'passed' if report['passed'] else 'FAILED'}")
    return EXIT_OK if report["passed"] else EXIT_NUMERIC


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sparse-restore",
                                 description="Sparse signal restoration and separation.")
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="coherence profile and recovery conditions")
    a.add_argument("dicts", nargs="*", metavar="DICT",
                   help="dictionary A and B: SRDM file or builtin spec (dct:M, identity:M, "
                        "dct2d:RxC, random:MxN:seed)")
    a.add_argument("--profile", help="inject mu_a,mu_b,mu_m instead of dictionaries")
    a.add_argument("--nx", type=int)
    a.add_argument("--ne", type=int)
    a.add_argument("--w", type=int)
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("curves", help="max-sparsity curves as CSV")
    c.add_argument("--profile", required=True, help="mu_a,mu_b,mu_m")
    c.add_argument("--ne-max", type=int, default=30)
    c.add_argument("--out", required=True, help="output directory")
    c.set_defaults(func=cmd_curves)

    d = sub.add_parser("declick", help="block-wise audio declicking and denoising")
    d.add_argument("--in", dest="inp", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--method", choices=METHODS, required=True)
    d.add_argument("--eta", type=float, required=True)
    d.add_argument("--clicks", help="index/PGM mask file, or 'auto'")
    d.add_argument("--dct-band", type=int, default=192)
    d.add_argument("--auto-threshold", type=float, default=0.05)
    d.add_argument("--reference", help="clean WAV for MSE reporting")
    d.add_argument("--threads", type=int, default=_default_threads())
    d.set_defaults(func=cmd_declick)

    i = sub.add_parser("inpaint", help="image scratch removal")
    i.add_argument("--in", dest="inp", required=True)
    i.add_argument("--out", required=True)
    i.add_argument("--mask", help="PGM or index mask file, or 'auto'")
    i.add_argument("--method", choices=("bpres", "bpsep"), required=True)
    i.add_argument("--eta", type=float, default=0.0)
    i.add_argument("--reference", help="clean PGM for MSE reporting")
    i.set_defaults(func=cmd_inpaint)

    e = sub.add_parser("experiment", help="fixed-seed end-to-end experiments")
    e.add_argument("--scenario", required=True)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)
    e.add_argument("--length", type=int, default=65536, help="signal length for declick")
    e.add_argument("--threads", type=int, default=_default_threads())
    e.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "threads", 1) is not None and getattr(args, "threads", 1) < 1:
        ap.error("--threads must be >= 1")
    if getattr(args, "eta", 0.0) is not None and getattr(args, "eta", 0.0) < 0:
        ap.error("--eta must be non-negative")
    try:
        return args.func(args)
    except InputError as exc:
        _say(f"error: {exc}")
        return EXIT_INPUT
    except SparseRestoreError as exc:
        _say(f"error [{exc.code}]: {exc}")
        return EXIT_NUMERIC
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        _say(f"numerical error: {exc}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

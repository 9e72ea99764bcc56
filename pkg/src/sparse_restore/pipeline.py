"""Block-wise audio declicking/denoising, image scratch removal, corruption
generators and the MSE metric."""

from __future__ import annotations

import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Union

import numpy as np
from scipy import fft as sfft
from scipy import ndimage

from .dictionary import build_dct, build_dct2d, build_identity
from .exceptions import SparseRestoreError
from .mediaio import AudioSignal, GrayImage
from .model import (BothSupports, InterferenceSupport, NoSupport, RecoveryProblem,
                    SupportSet)
from .recovery import (bp_restore, bp_separate, detect_saturation_support,
                       direct_restore)
from .solvers import SolverOptions

METHODS = ("dr", "bpres", "bpsep")

# Looser solver settings for long signals; the exact polishing step is
# skipped since the blocks are only approximately sparse.
PIPELINE_OPTIONS = SolverOptions(max_iterations=2000, tolerance=1e-4, polish=False)


# -- metrics and corruption -----------------------------------------------------

def mse_db(y, y_tilde) -> float:
    """``10 log10(||y - y_tilde||^2 / L)``; ``-inf`` for identical inputs."""
    y = np.asarray(y, dtype=float).ravel()
    y_tilde = np.asarray(y_tilde, dtype=float).ravel()
    if y.size != y_tilde.size:
        raise ValueError(f"length mismatch: {y.size} vs {y_tilde.size}")
    if y.size == 0:
        raise ValueError("empty signals")
    d = y - y_tilde
    e = float(d @ d) / y.size
    if e == 0.0:
        return -math.inf
    return 10.0 * math.log10(e)


def corrupt_gaussian(y, target_mse_db: float, seed: int) -> np.ndarray:
    """Add white Gaussian noise rescaled so that ``mse_db(y, out)`` hits the target."""
    if not math.isfinite(target_mse_db):
        raise ValueError("target_mse_db must be finite")
    y = np.asarray(y, dtype=float)
    rng = np.random.default_rng(seed)
    n = rng.standard_normal(y.shape)
    power = float(np.mean(n * n))
    n *= math.sqrt(10.0 ** (target_mse_db / 10.0) / power)
    return y + n


def corrupt_impulse(y, fraction: float, variance: float, seed: int):
    """Add ``N(0, variance)`` clicks at ``round(fraction * L)`` random positions.

    Returns the corrupted copy and the click support.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    if variance < 0:
        raise ValueError("variance must be non-negative")
    y = np.asarray(y, dtype=float).ravel()
    L = y.size
    k = int(math.floor(fraction * L + 0.5))
    rng = np.random.default_rng(seed)
    pos = np.sort(rng.choice(L, size=k, replace=False))
    out = y.copy()
    out[pos] += math.sqrt(variance) * rng.standard_normal(k)
    return out, SupportSet(tuple(pos.tolist()), L)


def synthetic_audio(length: int = 65536, n_active: int = 192, band: float = 100 / 1024,
                    seed: int = 0) -> np.ndarray:
    """Band-limited test signal: ``n_active`` random DCT coefficients (over the
    whole length) below ``band`` times Nyquist, peak-normalized to 1."""
    rng = np.random.default_rng(seed)
    top = max(n_active, int(band * length))
    c = np.zeros(length)
    idx = rng.choice(np.arange(1, top), size=n_active, replace=False)
    c[idx] = rng.standard_normal(n_active)
    y = sfft.idct(c, type=2, norm="ortho")
    return y / np.max(np.abs(y))


def synthetic_image(rows: int = 64, cols: int = 64, n_active: int = 60, band: int = 12,
                    seed: int = 0) -> np.ndarray:
    """Piecewise-smooth test image in ``[0, 0.9]``.

    A smooth background of ``n_active`` low-frequency 2-D DCT coefficients
    plus a slightly blurred disc and rectangle at random positions, so the
    image is only approximately sparse in the DCT domain.
    """
    rng = np.random.default_rng(seed)
    c = np.zeros((rows, cols))
    br, bc = min(band, rows), min(band, cols)
    flat = rng.choice(br * bc, size=min(n_active, br * bc), replace=False)
    kr, kc = np.divmod(flat, bc)
    c[kr, kc] = rng.standard_normal(flat.size) / (1.0 + kr + kc)
    img = sfft.idctn(c, type=2, norm="ortho")
    lo, hi = img.min(), img.max()
    if hi > lo:
        img = (img - lo) / (hi - lo)
    img = 0.1 + 0.6 * img

    r, q = np.mgrid[0:rows, 0:cols]
    rad = rng.uniform(0.15, 0.25) * min(rows, cols)
    cr, cq = rng.uniform(0.3, 0.7) * rows, rng.uniform(0.3, 0.7) * cols
    shapes = 0.25 * (((r - cr) ** 2 + (q - cq) ** 2) < rad ** 2)
    r0, q0 = int(rng.integers(0, rows // 2)), int(rng.integers(0, cols // 2))
    shapes[r0:r0 + rows // 4, q0:q0 + cols // 3] -= 0.2
    img = img + ndimage.gaussian_filter(shapes, 1.0)
    return np.clip(img, 0.0, 0.9)


def make_scratch_mask(rows: int, cols: int, coverage: float, seed: int) -> SupportSet:
    """Random-walk polyline scratches covering ``round(coverage * rows * cols)`` pixels."""
    if not 0.0 <= coverage <= 1.0:
        raise ValueError("coverage must lie in [0, 1]")
    n = rows * cols
    target = int(math.floor(coverage * n + 0.5))
    mask = np.zeros((rows, cols), dtype=bool)
    rng = np.random.default_rng(seed)
    count = 0
    while count < target:
        r, c = rng.uniform(0, rows), rng.uniform(0, cols)
        angle = rng.uniform(0, 2 * math.pi)
        steps = int(rng.integers(max(rows, cols) // 4 + 1, max(rows, cols) + 2))
        for _ in range(steps):
            i, j = int(r), int(c)
            if not (0 <= i < rows and 0 <= j < cols):
                break
            if not mask[i, j]:
                mask[i, j] = True
                count += 1
                if count >= target:
                    break
            angle += rng.normal(0.0, 0.25)
            r += math.sin(angle)
            c += math.cos(angle)
    return SupportSet.from_mask(mask.ravel())


# -- block plan ----------------------------------------------------------------

@dataclass(frozen=True)
class BlockPlan:
    """Overlapping blocks with raised-cosine cross-fades over the overlap only."""

    block_size: int = 1024
    overlap: int = 64

    def __post_init__(self):
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if not 0 <= self.overlap < self.block_size:
            raise ValueError("overlap must satisfy 0 <= overlap < block_size")

    @property
    def hop(self) -> int:
        return self.block_size - self.overlap

    @cached_property
    def fade_in(self) -> np.ndarray:
        j = np.arange(self.overlap)
        return np.sin(0.5 * np.pi * (j + 0.5) / self.overlap) ** 2

    @cached_property
    def fade_out(self) -> np.ndarray:
        # complementary ramp, so the pair sums to one sample by sample
        return 1.0 - self.fade_in

    def n_blocks(self, length: int) -> int:
        return max(1, math.ceil((length - self.overlap) / self.hop))

    def padded_length(self, length: int) -> int:
        return self.n_blocks(length) * self.hop + self.overlap

    def starts(self, length: int):
        return [b * self.hop for b in range(self.n_blocks(length))]

    def window(self, b: int, n_blocks: int) -> np.ndarray:
        w = np.ones(self.block_size)
        if self.overlap:
            if b > 0:
                w[: self.overlap] = self.fade_in
            if b < n_blocks - 1:
                w[-self.overlap:] = self.fade_out
        return w


def overlap_add(blocks, plan: BlockPlan, length: int) -> np.ndarray:
    nb = len(blocks)
    out = np.zeros(plan.padded_length(length))
    for b, blk in enumerate(blocks):
        s = b * plan.hop
        out[s:s + plan.block_size] += plan.window(b, nb) * blk
    return out[:length]


# -- audio ---------------------------------------------------------------------

def _emit_json(record, stream=None):
    stream = stream or sys.stderr
    stream.write(json.dumps(record) + "\n")


def declick(signal: Union[AudioSignal, np.ndarray], method: str, *, eta: float = 0.0,
            dct_band: int = 192, click_support: Union[SupportSet, str, None] = None,
            auto_threshold: float = 0.05, plan: Optional[BlockPlan] = None,
            opts: Optional[SolverOptions] = None, threads: int = 1,
            on_warning: Optional[Callable] = None):
    """Restore a 1-D signal block by block with the DCT / identity pair.

    Parameters
    ----------
    method : {"dr", "bpres", "bpsep"}
        ``dr`` restores the lowest ``dct_band`` DCT bins of each block given
        the click positions; ``bpres`` needs only the click positions;
        ``bpsep`` needs nothing and discards the separated clicks.
    click_support : SupportSet, "auto" or None
        Click positions over the whole signal.  ``"auto"`` estimates them by
        BP separation and keeps samples whose separated interference exceeds
        ``auto_threshold`` in magnitude.
    threads : int
        Blocks are independent; the overlap-add is serial, so the output
        does not depend on the thread count.

    Returns
    -------
    (AudioSignal, dict)
        Restored signal (same length) and run info with warning records.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if isinstance(signal, AudioSignal):
        sig = signal
    else:
        sig = AudioSignal(np.asarray(signal, dtype=float))
    plan = plan or BlockPlan()
    opts = opts or PIPELINE_OPTIONS
    L = sig.samples.size
    M = plan.block_size
    if method in ("dr", "bpres") and click_support is None:
        raise ValueError(f"method {method!r} needs click_support (a SupportSet or 'auto')")
    if not 0 <= dct_band <= M:
        raise ValueError(f"dct_band must lie in [0, {M}]")
    if isinstance(click_support, SupportSet) and click_support.n != L:
        raise ValueError(f"click support covers {click_support.n} samples, signal has {L}")

    Lp = plan.padded_length(L)
    padded = np.zeros(Lp)
    padded[:L] = sig.samples
    click_mask = np.zeros(Lp, dtype=bool)
    if isinstance(click_support, SupportSet):
        click_mask[:L] = click_support.mask()
    A = build_dct(M)
    I = build_identity(M)
    X = SupportSet(tuple(range(dct_band)), M)
    starts = plan.starts(L)

    def run(b):
        s = starts[b]
        z = padded[s:s + M]
        try:
            if method == "bpsep" or click_support == "auto":
                rep = bp_separate(RecoveryProblem(z, A, I, eta, knowledge=NoSupport()), opts)
                if method == "bpsep":
                    return A.matvec(rep.x_hat), None
                E = SupportSet.from_mask(np.abs(rep.e_hat) > auto_threshold)
            else:
                E = SupportSet.from_mask(click_mask[s:s + M])
            if method == "dr":
                prob = RecoveryProblem(z, A, I, eta, knowledge=BothSupports(X, E))
                rep = direct_restore(prob, override=True)
            else:
                prob = RecoveryProblem(z, A, I, eta, knowledge=InterferenceSupport(E))
                rep = bp_restore(prob, opts)
            return A.matvec(rep.x_hat), None
        except (SparseRestoreError, np.linalg.LinAlgError) as exc:
            return z.copy(), {"block": b, "error": str(exc), "fallback": True}

    n = len(starts)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(n)))
    else:
        results = [run(b) for b in range(n)]
    warnings = [w for _, w in results if w is not None]
    for w in warnings:
        (on_warning or _emit_json)(w)
    out = overlap_add([blk for blk, _ in results], plan, L)
    info = {"method": method, "blocks": n, "warnings": warnings}
    return AudioSignal(out, sig.sample_rate, sig.bit_depth), info


# -- images --------------------------------------------------------------------

IMAGE_OPTIONS = SolverOptions(max_iterations=3000, tolerance=1e-6, polish=True,
                              polish_every=100, polish_max_support=400)


def inpaint_image(img: Union[GrayImage, np.ndarray], mask: Union[SupportSet, str, None],
                  method: str, eta: float = 0.0, *, auto_threshold: float = 0.99,
                  opts: Optional[SolverOptions] = None):
    """Remove sparse scratches with the 2-D DCT / identity pair.

    ``mask`` lists the scratched pixels (row-major indices) for ``bpres``;
    ``"auto"`` marks pixels at or above ``auto_threshold`` (saturated white
    scratches).  ``bpsep`` ignores the mask.

    Returns
    -------
    (GrayImage, RecoveryReport)
    """
    if method not in ("bpres", "bpsep"):
        raise ValueError(f"unknown inpainting method {method!r}")
    if not isinstance(img, GrayImage):
        img = GrayImage(img)
    rows, cols = img.shape
    n = rows * cols
    z = img.pixels.ravel()
    A = build_dct2d(rows, cols)
    I = build_identity(n) if n <= 4096 else _implicit_identity(n)
    opts = opts or IMAGE_OPTIONS
    if method == "bpres":
        if mask is None:
            raise ValueError("bpres needs a scratch mask (SupportSet or 'auto')")
        if mask == "auto":
            mask = detect_saturation_support(z, auto_threshold)
        if not isinstance(mask, SupportSet) or mask.n != n:
            raise ValueError(f"mask must be a SupportSet over {n} pixels")
        rep = bp_restore(RecoveryProblem(z, A, I, eta, knowledge=InterferenceSupport(mask)), opts)
    else:
        rep = bp_separate(RecoveryProblem(z, A, I, eta, knowledge=NoSupport()), opts)
    out = np.clip(A.matvec(rep.x_hat).reshape(rows, cols), 0.0, 1.0)
    return GrayImage(out, dict(img.meta, method=method)), rep


class _IdentityOp:
    """Matrix-free identity for images too large for an explicit ``I``."""

    explicit = False
    kind = "identity"
    orthonormal = True
    row_tight = True
    gram_scale = 1.0

    def __init__(self, n):
        self.shape = (n, n)
        self.name = f"identity:{n}"
        self._cache = {}

    def matvec(self, x):
        return np.array(x, dtype=float)

    rmatvec = matvec

    def columns(self, idx):
        idx = np.asarray(idx, dtype=int)
        out = np.zeros((self.shape[0], idx.size))
        out[idx, np.arange(idx.size)] = 1.0
        return out

    def max_abs_entry(self):
        return 1.0


def _implicit_identity(n):
    return _IdentityOp(n)


def scratch(img: np.ndarray, mask: SupportSet, value: float = 1.0) -> np.ndarray:
    """Overwrite the masked pixels with ``value`` (white scratches by default)."""
    out = np.array(img, dtype=float)
    out.ravel()[mask.as_array()] = value
    return out

"""Minimal readers/writers: 16-bit mono PCM WAV, binary PGM (P5), index lists."""

from __future__ import annotations

import re
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import SupportSet


@dataclass
class AudioSignal:
    samples: np.ndarray
    sample_rate: int = 44100
    bit_depth: int = 16

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).ravel()
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("audio samples must be finite")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")


@dataclass
class GrayImage:
    pixels: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=float)
        if self.pixels.ndim != 2 or min(self.pixels.shape) < 1:
            raise ValueError("image must be a non-empty 2-D array")

    @property
    def shape(self):
        return self.pixels.shape


class MediaFormatError(ValueError):
    code = "format-error"


# -- WAV -----------------------------------------------------------------------

def read_wav(path) -> AudioSignal:
    try:
        with wave.open(str(path), "rb") as fh:
            if fh.getnchannels() != 1:
                raise MediaFormatError(f"{path}: only mono WAV is supported")
            if fh.getsampwidth() != 2:
                raise MediaFormatError(f"{path}: only 16-bit PCM is supported")
            rate = fh.getframerate()
            raw = fh.readframes(fh.getnframes())
    except (wave.Error, EOFError) as exc:
        raise MediaFormatError(f"{path}: {exc}") from exc
    data = np.frombuffer(raw, dtype="<i2").astype(float) / 32768.0
    return AudioSignal(data, rate, 16)


def to_pcm16(samples) -> np.ndarray:
    """Scale by 32768, round half away from zero, clamp to the int16 range."""
    s = np.asarray(samples, dtype=float) * 32768.0
    s = np.sign(s) * np.floor(np.abs(s) + 0.5)
    return np.clip(s, -32768, 32767).astype("<i2")


def write_wav(path, sig: AudioSignal) -> None:
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(int(sig.sample_rate))
        fh.writeframes(to_pcm16(sig.samples).tobytes())


# -- PGM -----------------------------------------------------------------------

_PGM_HEADER = re.compile(rb"P5\s+(?:#.*\s+)*(\d+)\s+(?:#.*\s+)*(\d+)\s+(?:#.*\s+)*(\d+)\s")


def read_pgm(path) -> GrayImage:
    raw = Path(path).read_bytes()
    m = _PGM_HEADER.match(raw)
    if m is None:
        raise MediaFormatError(f"{path}: not a binary (P5) PGM file")
    cols, rows, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise MediaFormatError(f"{path}: only maxval 255 is supported, got {maxval}")
    body = raw[m.end():]
    if len(body) < rows * cols:
        raise MediaFormatError(f"{path}: truncated pixel data")
    pix = np.frombuffer(body[: rows * cols], dtype=np.uint8).reshape(rows, cols)
    return GrayImage(pix / 255.0, {"source": str(path)})


def write_pgm(path, img: GrayImage) -> None:
    pix = np.clip(img.pixels, 0.0, 1.0) * 255.0
    pix = np.floor(pix + 0.5).astype(np.uint8)
    rows, cols = pix.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(pix.tobytes())


# -- masks ---------------------------------------------------------------------

def read_indices(path, n: int) -> SupportSet:
    """Whitespace/comma separated zero-based indices; ``#`` starts a comment."""
    text = Path(path).read_text()
    tokens = re.sub(r"#[^\n]*", " ", text).replace(",", " ").split()
    try:
        idx = [int(t) for t in tokens]
    except ValueError as exc:
        raise MediaFormatError(f"{path}: non-integer index") from exc
    if any(i < 0 or i >= n for i in idx):
        raise MediaFormatError(f"{path}: index outside [0, {n})")
    return SupportSet.from_indices(sorted(set(idx)), n)


def write_indices(path, S: SupportSet) -> None:
    Path(path).write_text("".join(f"{i}\n" for i in S))


def read_mask(path, n: int) -> SupportSet:
    """Mask from a PGM (nonzero pixels selected) or an index list."""
    raw = Path(path).read_bytes()[:2]
    if raw == b"P5":
        img = read_pgm(path)
        if img.pixels.size != n:
            raise MediaFormatError(f"{path}: mask has {img.pixels.size} pixels, expected {n}")
        return SupportSet.from_mask(img.pixels.ravel() > 0)
    return read_indices(path, n)

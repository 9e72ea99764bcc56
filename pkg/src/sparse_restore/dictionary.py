"""Standard dictionaries, coherence parameters and the SRDM matrix file format."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import fft as sfft

from .exceptions import DimensionMismatch, InvalidDictionary
from .model import Dictionary

SRDM_MAGIC = b"SRDM"
_HEADER = struct.Struct("<4sII")

# Column chunk for matrix-free coherence scans.
_CHUNK = 256


@dataclass(frozen=True)
class CoherenceProfile:
    """Coherence parameters of a dictionary pair ``(A, B)``.

    ``mu_d`` is the coherence of the concatenation ``[A B]`` and always
    equals ``max(mu_a, mu_b, mu_m)``.
    """

    mu_a: float
    mu_b: float
    mu_m: float
    mu_d: float

    def __post_init__(self):
        for name in ("mu_a", "mu_b", "mu_m", "mu_d"):
            v = float(getattr(self, name))
            if not (0.0 <= v <= 1.0 + 1e-12) or not np.isfinite(v):
                raise ValueError(f"{name}={v!r} outside [0, 1]")
            object.__setattr__(self, name, min(v, 1.0))
        if self.mu_d != max(self.mu_a, self.mu_b, self.mu_m):
            raise ValueError("mu_d must equal max(mu_a, mu_b, mu_m)")

    @classmethod
    def from_values(cls, mu_a: float, mu_b: float, mu_m: float) -> "CoherenceProfile":
        """Inject coherence values directly (no dictionaries needed)."""
        vals = []
        for v in (mu_a, mu_b, mu_m):
            v = float(v)
            if not (0.0 <= v <= 1.0 + 1e-12):
                raise ValueError(f"coherence {v!r} outside [0, 1]")
            vals.append(min(v, 1.0))
        return cls(*vals, max(vals))

    def as_dict(self) -> dict:
        return {"mu_a": self.mu_a, "mu_b": self.mu_b, "mu_m": self.mu_m, "mu_d": self.mu_d}


# -- builders ----------------------------------------------------------------

def dct_matrix(M: int) -> np.ndarray:
    """Orthonormal DCT-II synthesis matrix, ``[m, k] = c_k cos(pi (m + 1/2) k / M)``."""
    if M < 1:
        raise ValueError("M must be >= 1")
    m = np.arange(M)[:, None]
    k = np.arange(M)[None, :]
    mat = np.cos(np.pi * (m + 0.5) * k / M) * np.sqrt(2.0 / M)
    mat[:, 0] = 1.0 / np.sqrt(M)
    return mat


def build_identity(M: int) -> Dictionary:
    if M < 1:
        raise ValueError("M must be >= 1")
    return Dictionary(np.eye(M), kind="identity", name=f"identity:{M}")


def build_dct(M: int) -> Dictionary:
    return Dictionary(dct_matrix(M), kind="dct", name=f"dct:{M}")


def build_random_unit(M: int, N: int, seed: int) -> Dictionary:
    """Gaussian dictionary with columns rescaled to unit norm."""
    if M < 1 or N < 1:
        raise ValueError("M and N must be >= 1")
    rng = np.random.default_rng(seed)
    mat = rng.standard_normal((M, N))
    mat /= np.linalg.norm(mat, axis=0)
    return Dictionary(mat, name=f"random:{M}x{N}:{seed}")


class DCT2Dictionary(Dictionary):
    """Separable 2-D orthonormal DCT acting on row-major vectorized images.

    Matrix-free: the ``(rows*cols)^2`` matrix is only formed on request via
    :meth:`to_matrix`.
    """

    explicit = False

    def __init__(self, rows: int, cols: int):
        if rows < 1 or cols < 1:
            raise ValueError("rows and cols must be >= 1")
        self.rows = rows
        self.cols = cols
        self.kind = "dct2d"
        self.name = f"dct2d:{rows}x{cols}"
        self._dr = dct_matrix(rows)
        self._dc = dct_matrix(cols)
        self._cache = {}

    @property
    def shape(self):
        n = self.rows * self.cols
        return (n, n)

    @property
    def matrix(self):
        return self.to_matrix()

    def to_matrix(self) -> np.ndarray:
        if self.shape[0] > 4096:
            raise MemoryError(f"refusing to materialize a {self.shape} DCT matrix")
        return np.kron(self._dr, self._dc)

    @property
    def orthonormal(self) -> bool:
        return True

    def matvec(self, x):
        x = np.asarray(x, dtype=float).reshape(self.rows, self.cols)
        return sfft.idctn(x, type=2, norm="ortho").ravel()

    def rmatvec(self, y):
        y = np.asarray(y, dtype=float).reshape(self.rows, self.cols)
        return sfft.dctn(y, type=2, norm="ortho").ravel()

    def columns(self, idx):
        idx = np.asarray(idx, dtype=int)
        kr, kc = np.divmod(idx, self.cols)
        out = self._dr[:, kr][:, None, :] * self._dc[:, kc][None, :, :]
        return out.reshape(self.rows * self.cols, idx.size)

    def max_abs_entry(self) -> float:
        return float(np.abs(self._dr).max() * np.abs(self._dc).max())

    def __repr__(self):
        return f"DCT2Dictionary({self.rows}x{self.cols})"


def build_dct2d(rows: int, cols: int) -> Dictionary:
    return DCT2Dictionary(rows, cols)


class ConcatDictionary(Dictionary):
    """``D = [A B]`` kept as its two blocks (A's atoms first)."""

    def __init__(self, A: Dictionary, B: Dictionary):
        if A.shape[0] != B.shape[0]:
            raise DimensionMismatch(
                f"cannot concatenate: A has {A.shape[0]} rows, B has {B.shape[0]}"
            )
        self.parts = (A, B)
        self.kind = "concat"
        self.name = f"[{A.name} {B.name}]"
        self.explicit = A.explicit and B.explicit
        self._na = A.shape[1]
        self._matrix = np.hstack([A.matrix, B.matrix]) if self.explicit else None
        if self._matrix is not None:
            self._matrix.setflags(write=False)
        self._cache = {}

    @property
    def shape(self):
        A, B = self.parts
        return (A.shape[0], A.shape[1] + B.shape[1])

    @property
    def matrix(self):
        if self._matrix is None:
            raise InvalidDictionary("concatenation of implicit dictionaries has no explicit matrix")
        return self._matrix

    @property
    def orthonormal(self) -> bool:
        return False

    @property
    def row_tight(self) -> bool:
        A, B = self.parts
        return A.row_tight and B.row_tight

    @property
    def gram_scale(self):
        A, B = self.parts
        if self.row_tight:
            return A.gram_scale + B.gram_scale
        return None

    def matvec(self, w):
        w = np.asarray(w, dtype=float)
        A, B = self.parts
        return A.matvec(w[: self._na]) + B.matvec(w[self._na:])

    def rmatvec(self, y):
        A, B = self.parts
        return np.concatenate([A.rmatvec(y), B.rmatvec(y)])

    def columns(self, idx):
        idx = np.asarray(idx, dtype=int)
        A, B = self.parts
        out = np.empty((self.shape[0], idx.size))
        ia = idx < self._na
        if ia.any():
            out[:, ia] = A.columns(idx[ia])
        if (~ia).any():
            out[:, ~ia] = B.columns(idx[~ia] - self._na)
        return out

    def max_abs_entry(self) -> float:
        return max(p.max_abs_entry() for p in self.parts)


def concat(A: Dictionary, B: Dictionary) -> Dictionary:
    return ConcatDictionary(A, B)


# -- coherence -----------------------------------------------------------------

def coherence(A: Dictionary) -> float:
    """Largest ``|a_k^T a_l|`` over distinct atoms; 0 for a single atom."""
    cached = A._cache.get("coherence")
    if cached is not None:
        return cached
    if isinstance(A, ConcatDictionary):
        P, Q = A.parts
        mu = max(coherence(P), coherence(Q), mutual_coherence(P, Q))
    elif A.shape[1] == 1 or A.orthonormal:
        mu = 0.0 if A.shape[1] == 1 or not A.explicit else _explicit_coherence(A.matrix)
    elif A.explicit:
        mu = _explicit_coherence(A.matrix)
    else:
        mu = _scan_coherence(A)
    mu = min(mu, 1.0)
    A._cache["coherence"] = mu
    return mu


def _explicit_coherence(mat: np.ndarray) -> float:
    if mat.shape[1] == 1:
        return 0.0
    G = np.abs(mat.T @ mat)
    np.fill_diagonal(G, 0.0)
    return float(G.max())


def _scan_coherence(A: Dictionary) -> float:
    N = A.shape[1]
    best = 0.0
    for start in range(0, N, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, N))
        cols = A.columns(idx)
        G = np.abs(np.stack([A.rmatvec(c) for c in cols.T], axis=1))
        G[idx, np.arange(idx.size)] = 0.0
        best = max(best, float(G.max()))
    return best


def mutual_coherence(A: Dictionary, B: Dictionary) -> float:
    """Largest ``|a_k^T b_l|`` over all cross pairs."""
    if A.shape[0] != B.shape[0]:
        raise DimensionMismatch(
            f"mutual coherence needs equal row counts, got {A.shape[0]} and {B.shape[0]}"
        )
    if A.explicit and B.explicit:
        mu = float(np.max(np.abs(A.matrix.T @ B.matrix)))
    elif B.kind == "identity":
        mu = A.max_abs_entry()
    elif A.kind == "identity":
        mu = B.max_abs_entry()
    else:
        mu = 0.0
        N = B.shape[1]
        for start in range(0, N, _CHUNK):
            cols = B.columns(np.arange(start, min(start + _CHUNK, N)))
            for c in cols.T:
                mu = max(mu, float(np.max(np.abs(A.rmatvec(c)))))
    return min(mu, 1.0)


def profile(A: Dictionary, B: Dictionary) -> CoherenceProfile:
    mu_m = mutual_coherence(A, B)
    mu_a = coherence(A)
    mu_b = coherence(B)
    return CoherenceProfile(mu_a, mu_b, mu_m, max(mu_a, mu_b, mu_m))


# -- SRDM files ----------------------------------------------------------------

def save_dictionary(path, A: Dictionary) -> None:
    """Write ``A`` as SRDM: header ``"SRDM", u32 M, u32 N`` then column-major float64."""
    mat = np.asarray(A.matrix, dtype="<f8")
    M, N = mat.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SRDM_MAGIC, M, N))
        fh.write(mat.tobytes(order="F"))


def load_dictionary(path, *, name: Optional[str] = None) -> Dictionary:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise InvalidDictionary(f"{path}: truncated SRDM header")
    magic, M, N = _HEADER.unpack_from(raw)
    if magic != SRDM_MAGIC:
        raise InvalidDictionary(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 8 * M * N
    if len(raw) != expected:
        raise InvalidDictionary(f"{path}: expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size, count=M * N)
    return Dictionary(data.reshape((M, N), order="F"), name=name or Path(path).name)


def from_spec(spec: str) -> Dictionary:
    """Parse a builtin spec (``dct:M``, ``identity:M``, ``dct2d:RxC``,
    ``random:MxN:seed``) or load an SRDM file path."""
    head, _, rest = spec.partition(":")
    try:
        if head == "dct" and rest:
            return build_dct(int(rest))
        if head == "identity" and rest:
            return build_identity(int(rest))
        if head == "dct2d" and rest:
            r, c = rest.split("x")
            return build_dct2d(int(r), int(c))
        if head == "random" and rest:
            dims, seed = rest.split(":")
            m, n = dims.split("x")
            return build_random_unit(int(m), int(n), int(seed))
    except ValueError as exc:
        raise InvalidDictionary(f"malformed dictionary spec {spec!r}") from exc
    if Path(spec).is_file():
        return load_dictionary(spec)
    raise InvalidDictionary(f"unknown dictionary spec or missing file: {spec!r}")

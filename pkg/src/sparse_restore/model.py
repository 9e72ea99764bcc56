"""Core data types and the corruption model ``z = A x + B e + n``."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

import numpy as np
from scipy import fft as sfft

from .exceptions import DimensionMismatch, InvalidDictionary

UNIT_NORM_TOL = 1e-10

_FAST_KINDS = ("dense", "identity", "dct")


class Dictionary:
    """Real matrix whose columns (atoms) have unit Euclidean norm.

    ``kind`` selects a fast application path for the standard transforms;
    the explicit matrix is always the reference.

    Parameters
    ----------
    matrix : array_like, shape (M, N)
        Dictionary entries.
    kind : {"dense", "identity", "dct"}
        ``"identity"`` and ``"dct"`` promise that ``matrix`` is the identity
        or the orthonormal DCT-II synthesis matrix, enabling O(M log M)
        products.
    name : str, optional
        Label used in reports.
    """

    explicit = True

    def __init__(self, matrix, *, kind: str = "dense", name: Optional[str] = None):
        if kind not in _FAST_KINDS:
            raise ValueError(f"unknown dictionary kind {kind!r}")
        mat = np.array(matrix, dtype=float)
        if mat.ndim != 2:
            raise InvalidDictionary(f"dictionary must be 2-D, got ndim={mat.ndim}")
        if mat.shape[0] < 1 or mat.shape[1] < 1:
            raise InvalidDictionary(f"dictionary must be non-empty, got {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise InvalidDictionary("dictionary has non-finite entries")
        norms = np.linalg.norm(mat, axis=0)
        bad = np.flatnonzero(np.abs(norms - 1.0) > UNIT_NORM_TOL)
        if bad.size:
            k = int(bad[0])
            raise InvalidDictionary(
                f"column {k} has norm {norms[k]!r}; atoms must have unit norm "
                f"(tolerance {UNIT_NORM_TOL})"
            )
        mat.setflags(write=False)
        self._matrix = mat
        self.kind = kind
        self.name = name or kind
        self._cache: dict = {}

    # -- shape -------------------------------------------------------------
    @property
    def shape(self) -> tuple[int, int]:
        return self._matrix.shape

    @property
    def n_rows(self) -> int:
        return self.shape[0]

    @property
    def n_atoms(self) -> int:
        return self.shape[1]

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    # -- structure hints used by the solvers --------------------------------
    @property
    def orthonormal(self) -> bool:
        return self.kind in ("identity", "dct")

    @property
    def row_tight(self) -> bool:
        """True when ``A A^T = gram_scale * I``."""
        return self.orthonormal

    @property
    def gram_scale(self) -> Optional[float]:
        return 1.0 if self.orthonormal else None

    # -- products ----------------------------------------------------------
    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "identity":
            return x.copy()
        if self.kind == "dct":
            return sfft.idct(x, type=2, norm="ortho")
        return self._matrix @ x

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.kind == "identity":
            return y.copy()
        if self.kind == "dct":
            return sfft.dct(y, type=2, norm="ortho")
        return self._matrix.T @ y

    def columns(self, idx) -> np.ndarray:
        return self._matrix[:, np.asarray(idx, dtype=int)]

    def max_abs_entry(self) -> float:
        return float(np.max(np.abs(self._matrix)))

    def __repr__(self) -> str:
        return f"Dictionary(name={self.name!r}, shape={self.shape})"


@dataclass(frozen=True)
class SupportSet:
    """Strictly increasing index set inside a vector of length ``n``."""

    indices: tuple[int, ...]
    n: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if self.n < 0:
            raise ValueError("ambient length must be non-negative")
        for a, b in zip(idx, idx[1:]):
            if b <= a:
                raise ValueError("support indices must be strictly increasing")
        if idx and (idx[0] < 0 or idx[-1] >= self.n):
            raise ValueError(f"support indices must lie in [0, {self.n})")

    @classmethod
    def from_indices(cls, indices: Iterable[int], n: int) -> "SupportSet":
        arr = np.asarray(list(indices), dtype=int)
        uniq = np.unique(arr)
        if uniq.size != arr.size:
            raise ValueError("support indices contain duplicates")
        return cls(tuple(uniq.tolist()), n)

    @classmethod
    def from_mask(cls, mask) -> "SupportSet":
        mask = np.asarray(mask, dtype=bool).ravel()
        return cls(tuple(np.flatnonzero(mask).tolist()), mask.size)

    @classmethod
    def empty(cls, n: int) -> "SupportSet":
        return cls((), n)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i) -> bool:
        return int(i) in set(self.indices)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=int)

    def mask(self) -> np.ndarray:
        m = np.zeros(self.n, dtype=bool)
        m[self.as_array()] = True
        return m

    def complement(self) -> "SupportSet":
        return SupportSet.from_mask(~self.mask())


@dataclass(frozen=True)
class BothSupports:
    """Signal support and interference support known (direct restoration)."""

    signal: SupportSet
    interference: SupportSet


@dataclass(frozen=True)
class InterferenceSupport:
    """Only the interference support is known (BP restoration)."""

    interference: SupportSet


@dataclass(frozen=True)
class NoSupport:
    """No support knowledge (BP separation)."""


Knowledge = Union[BothSupports, InterferenceSupport, NoSupport]


@dataclass(frozen=True)
class RecoveryProblem:
    """Observation ``z`` with dictionaries, noise budget and support knowledge.

    ``eta`` is the budget handed to the solver; ``epsilon`` is the true noise
    bound when known (it must not exceed ``eta``).
    """

    z: np.ndarray
    A: Dictionary
    B: Dictionary
    eta: float = 0.0
    epsilon: Optional[float] = None
    knowledge: Knowledge = field(default_factory=NoSupport)

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.ndim != 1:
            raise DimensionMismatch("observation z must be a vector")
        object.__setattr__(self, "z", z)
        if self.A.shape[0] != z.size:
            raise DimensionMismatch(
                f"dictionary A has {self.A.shape[0]} rows, z has length {z.size}"
            )
        if self.B.shape[0] != z.size:
            raise DimensionMismatch(
                f"dictionary B has {self.B.shape[0]} rows, z has length {z.size}"
            )
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        if self.epsilon is not None:
            if self.epsilon < 0:
                raise ValueError("epsilon must be non-negative")
            if self.epsilon > self.eta:
                raise ValueError("epsilon must not exceed eta")
        k = self.knowledge
        if isinstance(k, BothSupports):
            _check_support(k.signal, self.A.shape[1], "signal")
            _check_support(k.interference, self.B.shape[1], "interference")
        elif isinstance(k, InterferenceSupport):
            _check_support(k.interference, self.B.shape[1], "interference")
        elif not isinstance(k, NoSupport):
            raise TypeError(f"unknown knowledge level {k!r}")


def _check_support(s: SupportSet, n: int, what: str):
    if s.n != n:
        raise DimensionMismatch(
            f"{what} support is defined over length {s.n}, dictionary has {n} atoms"
        )


@dataclass
class RecoveryReport:
    """Result of one recovery run.

    ``residual_l2`` is ``||z - A x_hat - B e_hat||`` (``e_hat`` taken as zero
    when absent); when ``residual_projected`` is set it is measured on the
    projected system ``||R (z - A x_hat)||`` instead.
    """

    x_hat: np.ndarray
    residual_l2: float
    iterations: int
    converged: bool
    e_hat: Optional[np.ndarray] = None
    residual_projected: bool = False
    dual: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)


def synthesize(A, x, B, e, n) -> np.ndarray:
    """Evaluate ``A x + B e + n`` (in that order)."""
    x = np.asarray(x, dtype=float)
    e = np.asarray(e, dtype=float)
    n = np.asarray(n, dtype=float)
    M = A.shape[0]
    if B.shape[0] != M:
        raise DimensionMismatch(f"B has {B.shape[0]} rows, A has {M}")
    if x.shape != (A.shape[1],):
        raise DimensionMismatch(f"x has shape {x.shape}, A has {A.shape[1]} atoms")
    if e.shape != (B.shape[1],):
        raise DimensionMismatch(f"e has shape {e.shape}, B has {B.shape[1]} atoms")
    if n.shape != (M,):
        raise DimensionMismatch(f"n has shape {n.shape}, expected ({M},)")
    z = A.matvec(x)
    z = z + B.matvec(e)
    z = z + n
    return z

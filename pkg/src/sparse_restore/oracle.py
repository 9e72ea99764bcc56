"""Brute-force references for small instances: exact restricted isometry
constants and exhaustive l0 minimization."""

from __future__ import annotations

import itertools
import math
from typing import Iterator, List

import numpy as np

from .exceptions import EnumerationBudgetExceeded, NoSparseSolution
from .model import SupportSet
from .operators import to_dense
from .solvers import build_projector

DEFAULT_BUDGET = 2_000_000
_BATCH = 4096


def _combinations(N: int, k: int, batch: int = _BATCH) -> Iterator[np.ndarray]:
    """Lexicographic size-``k`` subsets of ``range(N)`` in arrays of shape (b, k)."""
    it = itertools.combinations(range(N), k)
    while True:
        chunk = list(itertools.islice(it, batch))
        if not chunk:
            return
        yield np.asarray(chunk, dtype=int).reshape(len(chunk), k)


def ric_of_matrix(mat: np.ndarray, k: int, budget: int = DEFAULT_BUDGET) -> float:
    """``max_S max(1 - lambda_min, lambda_max - 1)`` of ``mat_S^T mat_S`` over ``|S| = k``."""
    mat = np.asarray(mat, dtype=float)
    N = mat.shape[1]
    if not 1 <= k <= N:
        raise ValueError(f"k={k} outside [1, {N}]")
    need = math.comb(N, k)
    if need > budget:
        raise EnumerationBudgetExceeded(need, budget)
    G = mat.T @ mat
    worst = 0.0
    for idx in _combinations(N, k):
        sub = G[idx[:, :, None], idx[:, None, :]]
        lam = np.linalg.eigvalsh(sub)
        worst = max(worst, float(np.max(1.0 - lam[:, 0])), float(np.max(lam[:, -1] - 1.0)))
    return worst


def exact_ric(D, k: int, budget: int = DEFAULT_BUDGET) -> float:
    """Exact RIC of order ``k`` by enumerating all supports."""
    return ric_of_matrix(to_dense(D), k, budget)


def exact_ric_projected(A, B, E: SupportSet, k: int, budget: int = DEFAULT_BUDGET) -> float:
    """Exact RIC of ``R_E A`` (columns left unnormalized)."""
    R = build_projector(B, E)
    return ric_of_matrix(R.apply_columns(to_dense(A)), k, budget)


def _fits(mat, z, k, tol_abs):
    """Yield (support, coefficients) for every size-``k`` support fitting ``z``."""
    N = mat.shape[1]
    for idx in _combinations(N, k, batch=1024):
        sub = mat[:, idx].transpose(1, 0, 2)           # (b, M, k)
        coef = np.linalg.pinv(sub) @ z                 # (b, k)
        res = np.linalg.norm(z[None, :] - np.einsum("bmk,bk->bm", sub, coef), axis=1)
        for j in np.flatnonzero(res <= tol_abs):
            yield idx[j], coef[j]


def p0_bruteforce(A, z, residual_tol: float = 1e-9, k_max: int = 6) -> np.ndarray:
    """Sparsest ``x`` with ``||z - A x|| <= residual_tol * ||z||``.

    Supports are tried by increasing size and, within a size, in
    lexicographic order; the first fit wins.
    """
    mat = to_dense(A)
    z = np.asarray(z, dtype=float)
    N = mat.shape[1]
    znorm = float(np.linalg.norm(z))
    if znorm == 0.0:
        return np.zeros(N)
    tol_abs = residual_tol * znorm
    for k in range(1, min(k_max, N) + 1):
        for idx, coef in _fits(mat, z, k, tol_abs):
            x = np.zeros(N)
            x[idx] = coef
            return x
    raise NoSparseSolution(f"no representation with at most {k_max} atoms")


def sparsest_supports(A, z, residual_tol: float = 1e-9, k_max: int = 6) -> List[SupportSet]:
    """All supports of minimal size that fit ``z``; a single entry means the
    sparsest representation is unique (up to supports of that size)."""
    mat = to_dense(A)
    z = np.asarray(z, dtype=float)
    N = mat.shape[1]
    znorm = float(np.linalg.norm(z))
    if znorm == 0.0:
        return [SupportSet.empty(N)]
    tol_abs = residual_tol * znorm
    for k in range(1, min(k_max, N) + 1):
        found = [SupportSet(tuple(int(i) for i in idx), N) for idx, _ in _fits(mat, z, k, tol_abs)]
        if found:
            return found
    raise NoSparseSolution(f"no representation with at most {k_max} atoms")

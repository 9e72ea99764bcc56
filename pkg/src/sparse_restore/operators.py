"""Small linear-operator wrappers used by the solvers.

Every operator exposes ``shape``, ``matvec``, ``rmatvec`` and ``columns``
plus two structure hints:

``row_tight``
    ``A A^T = c I``.
``gram_scale``
    ``c`` such that ``A A^T = c P`` for an orthogonal projector ``P`` with
    ``P A = A`` (``None`` when no such structure is known).  This lets the
    BPDN solver invert ``I + A^T A`` in closed form.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse.linalg import LinearOperator


class Composed:
    """``R A`` for a symmetric projector ``R`` (applied on the left)."""

    explicit = False
    row_tight = False

    def __init__(self, R, A):
        if R.shape[1] != A.shape[0]:
            raise ValueError("projector and operator sizes disagree")
        self.R = R
        self.A = A
        self.shape = (R.shape[0], A.shape[1])

    @property
    def gram_scale(self):
        # (R A)(R A)^T = c R when A A^T = c I
        return self.A.gram_scale if self.A.row_tight else None

    def matvec(self, x):
        return self.R.apply(self.A.matvec(x))

    def rmatvec(self, y):
        return self.A.rmatvec(self.R.apply(y))

    def columns(self, idx):
        cols = self.A.columns(idx)
        return self.R.apply_columns(cols)


class DenseMap:
    """Plain matrix with the operator interface."""

    explicit = True
    row_tight = False
    gram_scale = None

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=float)
        if self.matrix.ndim != 2:
            raise ValueError("matrix must be 2-D")
        self.shape = self.matrix.shape

    def matvec(self, x):
        return self.matrix @ x

    def rmatvec(self, y):
        return self.matrix.T @ y

    def columns(self, idx):
        return self.matrix[:, np.asarray(idx, dtype=int)]


def as_operator(A):
    """Accept a Dictionary, one of the wrappers above, or a bare ndarray."""
    if isinstance(A, np.ndarray):
        return DenseMap(A)
    return A


def to_dense(A) -> np.ndarray:
    """Explicit matrix of an operator (matrix-free ones are probed column by column)."""
    A = as_operator(A)
    if getattr(A, "explicit", False):
        return np.asarray(A.matrix, dtype=float)
    return A.columns(np.arange(A.shape[1]))


def scipy_operator(A) -> LinearOperator:
    A = as_operator(A)
    return LinearOperator(A.shape, matvec=A.matvec, rmatvec=A.rmatvec, dtype=float)

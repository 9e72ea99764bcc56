import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparse_restore.dictionary import build_dct, build_identity
from sparse_restore.exceptions import DimensionMismatch, InvalidDictionary
from sparse_restore.model import (BothSupports, Dictionary, InterferenceSupport, NoSupport,
                                  RecoveryProblem, SupportSet, synthesize)


def naive_synthesize(A, x, B, e, n):
    M = A.shape[0]
    z = [0.0] * M
    for m in range(M):
        s = 0.0
        for k in range(A.shape[1]):
            s += A[m, k] * x[k]
        t = 0.0
        for k in range(B.shape[1]):
            t += B[m, k] * e[k]
        z[m] = s + t + n[m]
    return np.array(z)


def test_synthesize_zero():
    A, B = build_identity(4), build_identity(4)
    assert np.array_equal(synthesize(A, np.zeros(4), B, np.zeros(4), np.zeros(4)), np.zeros(4))


def test_synthesize_identity():
    A, B = build_identity(4), build_identity(4)
    z = synthesize(A, [1, 0, 0, 0], B, [0, 1, 0, 0], np.zeros(4))
    assert np.array_equal(z, [1, 1, 0, 0])


def test_synthesize_matches_naive_loop(rng):
    A, B = build_dct(8), build_identity(8)
    x = np.zeros(8)
    x[rng.choice(8, 2, replace=False)] = rng.standard_normal(2)
    e = np.zeros(8)
    e[rng.integers(8)] = rng.standard_normal()
    n = 0.01 * rng.standard_normal(8)
    ref = naive_synthesize(A.matrix, x, B.matrix, e, n)
    assert np.allclose(synthesize(A, x, B, e, n), ref, rtol=0, atol=1e-12)


@pytest.mark.parametrize("bad", ["x", "e", "n", "B"])
def test_synthesize_names_offending_operand(bad):
    A = build_identity(4)
    B = build_identity(3) if bad == "B" else build_identity(4)
    x = np.zeros(3) if bad == "x" else np.zeros(4)
    e = np.zeros(5) if bad == "e" else np.zeros(B.shape[1])
    n = np.zeros(2) if bad == "n" else np.zeros(4)
    with pytest.raises(DimensionMismatch, match=rf"\b{bad}\b"):
        synthesize(A, x, B, e, n)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_synthesize_linear(seed, a, b):
    r = np.random.default_rng(seed)
    A, B = build_dct(8), build_identity(8)
    x1, x2 = r.standard_normal(8), r.standard_normal(8)
    zero = np.zeros(8)
    lhs = synthesize(A, a * x1 + b * x2, B, zero, zero)
    rhs = a * synthesize(A, x1, B, zero, zero) + b * synthesize(A, x2, B, zero, zero)
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * max(1.0, np.linalg.norm(rhs))


def test_dictionary_rejects_non_unit_columns():
    m = np.eye(3)
    m[0, 0] = 1 + 2e-10
    with pytest.raises(InvalidDictionary):
        Dictionary(m)
    m[0, 0] = 1 + 5e-11
    Dictionary(m)


@pytest.mark.parametrize("bad", [np.zeros((0, 2)), np.ones(3), np.array([[np.nan]])])
def test_dictionary_rejects_malformed(bad):
    with pytest.raises(InvalidDictionary):
        Dictionary(bad)


def test_dictionary_is_read_only():
    D = build_identity(3)
    with pytest.raises(ValueError):
        D.matrix[0, 0] = 2.0


def test_fast_paths_match_matrix(rng):
    for D in (build_dct(16), build_identity(16)):
        x = rng.standard_normal(16)
        assert np.allclose(D.matvec(x), D.matrix @ x, atol=1e-12)
        assert np.allclose(D.rmatvec(x), D.matrix.T @ x, atol=1e-12)


def test_support_set_invariants():
    S = SupportSet.from_indices([5, 1, 3], 8)
    assert S.indices == (1, 3, 5) and len(S) == 3 and 3 in S
    assert S.complement().indices == (0, 2, 4, 6, 7)
    with pytest.raises(ValueError):
        SupportSet((3, 1), 8)
    with pytest.raises(ValueError):
        SupportSet.from_indices([1, 1], 8)
    with pytest.raises(ValueError):
        SupportSet((8,), 8)


def test_recovery_problem_validation():
    A, B = build_identity(4), build_identity(4)
    z = np.zeros(4)
    RecoveryProblem(z, A, B, 0.5, 0.5)
    with pytest.raises(ValueError):
        RecoveryProblem(z, A, B, 0.1, 0.2)
    with pytest.raises(ValueError):
        RecoveryProblem(z, A, B, -1.0)
    with pytest.raises(DimensionMismatch):
        RecoveryProblem(np.zeros(3), A, B)
    with pytest.raises(DimensionMismatch):
        RecoveryProblem(z, A, B, knowledge=InterferenceSupport(SupportSet((), 5)))
    RecoveryProblem(z, A, B, knowledge=BothSupports(SupportSet((0,), 4), SupportSet((), 4)))
    RecoveryProblem(z, A, B, knowledge=NoSupport())

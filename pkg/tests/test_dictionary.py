import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparse_restore.dictionary import (CoherenceProfile, build_dct, build_dct2d, build_identity,
                                       build_random_unit, coherence, concat, dct_matrix,
                                       from_spec, load_dictionary, mutual_coherence, profile,
                                       save_dictionary)
from sparse_restore.exceptions import DimensionMismatch, InvalidDictionary
from sparse_restore.model import Dictionary


def pairwise_coherence(mat):
    best = 0.0
    for k, l in itertools.combinations(range(mat.shape[1]), 2):
        best = max(best, abs(float(np.dot(mat[:, k], mat[:, l]))))
    return best


def cross_scan(a, b):
    return max(abs(float(np.dot(a[:, k], b[:, l])))
               for k in range(a.shape[1]) for l in range(b.shape[1]))


def test_identity_builders():
    assert np.array_equal(build_identity(1).matrix, [[1.0]])
    assert coherence(build_identity(4)) == 0.0


def test_dct_small_cases():
    assert np.allclose(build_dct(1).matrix, [[1.0]])
    D = build_dct(8).matrix
    assert np.abs(D.T @ D - np.eye(8)).max() <= 1e-12


def test_dct_entries_follow_definition():
    M = 6
    D = dct_matrix(M)
    for m in range(M):
        for k in range(M):
            c = 1 / math.sqrt(M) if k == 0 else math.sqrt(2 / M)
            assert D[m, k] == pytest.approx(c * math.cos(math.pi * (m + 0.5) * k / M), abs=1e-15)


def test_dct_coherence_is_zero():
    assert coherence(build_dct(64)) <= 1e-12


def test_random_unit_builder():
    D = build_random_unit(1, 1, 4)
    assert abs(D.matrix[0, 0]) == pytest.approx(1.0)
    D1 = build_random_unit(16, 32, 7)
    D2 = build_random_unit(16, 32, 7)
    assert np.array_equal(D1.matrix, D2.matrix)
    assert np.abs(np.linalg.norm(D1.matrix, axis=0) - 1).max() <= 1e-12


def test_coherence_matches_pairwise_scan():
    D = build_random_unit(8, 16, 3)
    assert coherence(D) == pytest.approx(pairwise_coherence(D.matrix), abs=1e-15)


def test_mutual_coherence_identical_atoms():
    assert mutual_coherence(build_identity(4), build_identity(4)) == 1.0


@pytest.mark.parametrize("M", [2, 4, 6, 8, 64, 1024])
def test_dct_identity_mutual_coherence_exhaustive(M):
    D = build_dct(M)
    got = mutual_coherence(D, build_identity(M))
    assert got == pytest.approx(float(np.abs(D.matrix).max()), abs=1e-15)
    if M <= 64:
        assert got == pytest.approx(cross_scan(D.matrix, np.eye(M)), abs=1e-15)


@pytest.mark.parametrize("M", [4, 64, 1024])
def test_dct_identity_mutual_coherence_closed_form(M):
    # For M a power of two no entry reaches sqrt(2/M); the largest is at
    # k=1, m=0: sqrt(2/M) cos(pi/(2M)).
    got = mutual_coherence(build_dct(M), build_identity(M))
    assert got == pytest.approx(math.sqrt(2 / M) * math.cos(math.pi / (2 * M)), abs=1e-12)
    assert got < math.sqrt(2 / M)


def test_dct_identity_1024_close_to_reference_value():
    got = mutual_coherence(build_dct(1024), build_identity(1024))
    assert got == pytest.approx(1 / math.sqrt(512), rel=2e-6)
    assert got == pytest.approx(0.044194, abs=5e-7)


def test_profile_examples():
    p = profile(build_identity(4), build_identity(4))
    assert (p.mu_a, p.mu_b, p.mu_m, p.mu_d) == (0, 0, 1, 1)
    q = CoherenceProfile.from_values(0.04, 0.04, 0.1)
    assert q.mu_d == 0.1


def test_profile_rejects_inconsistent_mu_d():
    with pytest.raises(ValueError):
        CoherenceProfile(0.1, 0.1, 0.2, 0.1)
    with pytest.raises(ValueError):
        CoherenceProfile.from_values(1.5, 0, 0)


def test_concat_examples():
    D = concat(build_identity(2), build_identity(2))
    assert np.array_equal(D.matrix, np.hstack([np.eye(2), np.eye(2)]))
    E = concat(build_dct(8), build_identity(8))
    assert E.shape == (8, 16)
    assert np.allclose(np.linalg.norm(E.matrix, axis=0), 1)
    with pytest.raises(DimensionMismatch):
        concat(build_identity(2), build_identity(3))
    with pytest.raises(DimensionMismatch):
        mutual_coherence(build_identity(2), build_identity(3))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 10), st.integers(1, 8), st.integers(1, 8), st.integers(0, 10**6))
def test_concat_coherence_is_max_of_parts(M, Na, Nb, seed):
    A = build_random_unit(M, Na, seed)
    B = build_random_unit(M, Nb, seed + 1)
    D = concat(A, B)
    assert coherence(D) == max(coherence(A), coherence(B), mutual_coherence(A, B))
    # and agrees with a direct scan of the explicit concatenation
    assert coherence(D) == pytest.approx(
        pairwise_coherence(D.matrix) if D.shape[1] > 1 else 0.0, abs=1e-15)
    p = profile(A, B)
    assert p.mu_d == coherence(D)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 10), st.integers(1, 8), st.integers(1, 8), st.integers(0, 10**6))
def test_mutual_coherence_symmetric(M, Na, Nb, seed):
    A = build_random_unit(M, Na, seed)
    B = build_random_unit(M, Nb, seed + 7)
    assert abs(mutual_coherence(A, B) - mutual_coherence(B, A)) <= 1e-15


def test_dct2d_small():
    D = build_dct2d(1, 1)
    assert np.allclose(D.to_matrix(), [[1.0]])
    D = build_dct2d(4, 4)
    K = D.to_matrix()
    assert np.abs(K.T @ K - np.eye(16)).max() <= 1e-12


def test_dct2d_constant_image_has_only_dc():
    D = build_dct2d(8, 8)
    c = D.rmatvec(np.full(64, 0.3))
    assert abs(c[0]) > 0
    assert np.abs(c[1:]).max() <= 1e-12


def test_dct2d_operator_matches_explicit(rng):
    D = build_dct2d(4, 6)
    K = D.to_matrix()
    x = rng.standard_normal(24)
    assert np.allclose(D.matvec(x), K @ x, atol=1e-12)
    assert np.allclose(D.rmatvec(x), K.T @ x, atol=1e-12)
    assert np.allclose(D.columns([0, 5, 23]), K[:, [0, 5, 23]], atol=1e-15)


def test_dct2d_coherence_falls_back():
    D = build_dct2d(4, 4)
    assert coherence(D) <= 1e-12
    I = build_identity(16)
    assert mutual_coherence(D, I) == pytest.approx(np.abs(D.to_matrix()).max(), abs=1e-15)


def test_srdm_round_trip(tmp_path):
    D = build_random_unit(5, 7, 1)
    path = tmp_path / "d.srdm"
    save_dictionary(path, D)
    raw = path.read_bytes()
    assert raw[:4] == b"SRDM"
    assert int.from_bytes(raw[4:8], "little") == 5
    assert int.from_bytes(raw[8:12], "little") == 7
    # column-major payload: first 5 doubles are column 0
    assert np.array_equal(np.frombuffer(raw[12:52], "<f8"), D.matrix[:, 0])
    assert np.array_equal(load_dictionary(path).matrix, D.matrix)


def test_srdm_rejects_corruption(tmp_path):
    path = tmp_path / "bad.srdm"
    path.write_bytes(b"XXXX" + bytes(8))
    with pytest.raises(InvalidDictionary):
        load_dictionary(path)
    save_dictionary(path, build_identity(2))
    path.write_bytes(path.read_bytes()[:-1])
    with pytest.raises(InvalidDictionary):
        load_dictionary(path)


def test_from_spec():
    assert from_spec("dct:8").shape == (8, 8)
    assert from_spec("identity:3").kind == "identity"
    assert from_spec("dct2d:2x3").shape == (6, 6)
    assert from_spec("random:4x6:2").shape == (4, 6)
    for bad in ("dct:x", "bogus", "/no/such/file"):
        with pytest.raises(InvalidDictionary):
            from_spec(bad)

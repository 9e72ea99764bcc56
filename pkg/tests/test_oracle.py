import numpy as np
import pytest

from sparse_restore.dictionary import (build_dct, build_identity, build_random_unit, concat,
                                       profile)
from sparse_restore.exceptions import EnumerationBudgetExceeded, NoSparseSolution
from sparse_restore.guarantees import ric_bound_projected
from sparse_restore.model import Dictionary, SupportSet
from sparse_restore.oracle import (exact_ric, exact_ric_projected, p0_bruteforce, ric_of_matrix,
                                   sparsest_supports)


def test_exact_ric_orthonormal():
    for k in (1, 2, 3):
        assert exact_ric(build_dct(8), k) <= 1e-12


def test_exact_ric_single_atom():
    assert exact_ric(build_random_unit(6, 10, 2), 1) <= 1e-12


def test_exact_ric_duplicated_identity():
    assert exact_ric(concat(build_identity(2), build_identity(2)), 2) == pytest.approx(1.0, abs=1e-12)


def test_exact_ric_against_loop():
    D = build_random_unit(6, 9, 4).matrix
    import itertools
    best = 0.0
    for S in itertools.combinations(range(9), 3):
        lam = np.linalg.eigvalsh(D[:, S].T @ D[:, S])
        best = max(best, 1 - lam[0], lam[-1] - 1)
    assert ric_of_matrix(D, 3) == pytest.approx(best, abs=1e-14)


def test_exact_ric_budget():
    with pytest.raises(EnumerationBudgetExceeded) as exc:
        exact_ric(build_random_unit(10, 40, 0), 5, budget=1000)
    assert exc.value.required > 1000
    with pytest.raises(ValueError):
        exact_ric(build_identity(3), 4)


def test_projected_empty_equals_plain():
    A = build_random_unit(8, 12, 1)
    B = build_identity(8)
    assert exact_ric_projected(A, B, SupportSet.empty(8), 2) == pytest.approx(exact_ric(A, 2), abs=1e-14)


def test_projected_dct8_bound():
    A, B = build_dct(8), build_identity(8)
    E = SupportSet.from_indices([0], 8)
    got = exact_ric_projected(A, B, E, 2)
    assert got <= ric_bound_projected(2, 1, profile(A, B)) + 1e-12
    assert exact_ric_projected(A, B, E, 1) > 0


def test_p0_single_atom():
    A = build_random_unit(6, 10, 3)
    x = p0_bruteforce(A, A.matrix[:, 3])
    want = np.zeros(10)
    want[3] = 1.0
    assert np.allclose(x, want, atol=1e-10)


def test_p0_zero():
    assert not p0_bruteforce(build_identity(3), np.zeros(3)).any()


def test_p0_planted_unique(rng):
    D = concat(build_dct(16), build_identity(16))
    w = np.zeros(32)
    w[[4, 25]] = [1.2, -0.6]
    z = D.matrix @ w
    assert np.allclose(p0_bruteforce(D, z), w, atol=1e-9)
    sups = sparsest_supports(D, z)
    assert [s.indices for s in sups] == [(4, 25)]


def test_p0_no_solution():
    D = Dictionary(np.eye(4)[:, :3])
    with pytest.raises(NoSparseSolution):
        p0_bruteforce(D, np.array([0.0, 0, 0, 1]))

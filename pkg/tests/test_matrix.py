import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from canvessel.errors import DimensionError, ResonanceError, SingularityError
from canvessel.matrix import ID2, SIGMA_CANONICAL, allclose, det, inf_norm, inverse, is_singular, solve, solve_sylvester_diag

finite = st.floats(-3, 3, allow_nan=False)
cplx = st.builds(complex, finite, finite)


def random_matrix(seed, n):
    r = np.random.default_rng(seed)
    return r.normal(size=(n, n)) + 1j * r.normal(size=(n, n))


def test_det_examples():
    assert det(ID2) == 1
    assert det(SIGMA_CANONICAL) == -1


@pytest.mark.parametrize("n", [1, 2, 3, 4, 8])
def test_det_times_det_inverse(n):
    m = random_matrix(n, n) + 3 * np.eye(n)
    assert abs(det(m) * det(inverse(m)) - 1) < 1e-12


def test_det_rejects_non_square():
    with pytest.raises(DimensionError):
        det(np.zeros((2, 3)))


def test_inverse_examples():
    assert np.array_equal(inverse(ID2), ID2)
    assert np.allclose(inverse(SIGMA_CANONICAL), SIGMA_CANONICAL, atol=0)
    assert np.allclose(inverse(np.diag([2, 4j])), np.diag([0.5, -0.25j]), atol=1e-15)


def test_inverse_singular_reports_det():
    with pytest.raises(SingularityError) as info:
        inverse(np.array([[1.0, 2.0], [2.0, 4.0]]))
    assert info.value.det == 0.0


def test_batched_inverse_and_solve():
    m = np.stack([random_matrix(s, 3) + 4 * np.eye(3) for s in range(5)])
    assert np.max(inf_norm(m @ inverse(m) - np.eye(3))) < 1e-10
    rhs = np.ones((5, 3, 2))
    assert np.allclose(m @ solve(m, rhs), rhs, atol=1e-12)


def test_solve_unchecked_marks_singular_points():
    m = np.stack([np.eye(2), np.zeros((2, 2))])
    out = solve(m, np.ones((2, 2, 1)), check=False)
    assert np.allclose(out[0], 1) and not np.all(np.isfinite(out[1]))
    assert list(is_singular(m)) == [False, True]


@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 3, 5]))
def test_inverse_property(seed, n):
    m = random_matrix(seed, n)
    if is_singular(m, 1e-6):
        return
    assert inf_norm(m @ inverse(m) - np.eye(n)) < 1e-10 * max(1.0, np.linalg.cond(m))


@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 3, 4]))
def test_det_multiplicative(seed, n):
    a, b = random_matrix(seed, n), random_matrix(seed + 1, n)
    lhs, rhs = det(a @ b), det(a) * det(b)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))


def test_sylvester_examples():
    assert np.allclose(solve_sylvester_diag([1], [1], [[2]]), [[-1]])
    assert np.array_equal(solve_sylvester_diag([1, 2], [3j, 1], np.zeros((2, 2))), np.zeros((2, 2)))


def test_sylvester_resonance_lists_pair():
    with pytest.raises(ResonanceError) as info:
        solve_sylvester_diag([1, 2j], [3, -2j], np.ones((2, 2)))
    assert info.value.pairs == [(1, 1)]


@given(st.lists(cplx, min_size=1, max_size=4), st.lists(cplx, min_size=1, max_size=4), st.integers(0, 1000))
def test_sylvester_residual(lams, mus, seed):
    lam, mu = np.array(lams) + 5, np.array(mus) + 5  # keep lambda_i + mu_j away from 0
    rhs = np.random.default_rng(seed).normal(size=(lam.size, mu.size)) + 0j
    X = solve_sylvester_diag(lam, mu, rhs)
    r = np.diag(lam) @ X + X @ np.diag(mu) + rhs
    assert np.max(np.abs(r)) < 1e-12 * max(1.0, np.max(np.abs(rhs)))


def test_allclose_mixed_tolerance():
    assert allclose([1.0], [1.0 + 1e-11])
    assert not allclose([1.0], [1.0 + 1e-6])

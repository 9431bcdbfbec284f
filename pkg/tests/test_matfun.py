import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hkgame import DomainError, NonFiniteError, SingularMatrixError, expm, gramian_block, solve_linear, zachary
from hkgame.graph import dynamics_matrix
from hkgame.matfun import LinearSolver, gramian_quadrature


def test_expm_examples():
    np.testing.assert_array_equal(expm(np.zeros((3, 3)), 2.5), np.eye(3))
    np.testing.assert_allclose(expm(np.diag([-1.0, -2.0])), np.diag([np.exp(-1), np.exp(-2)]), rtol=1e-14)


@pytest.mark.parametrize("t", [0.0, 0.3, 1.0, 4.0])
def test_expm_two_node_eigen_oracle(t):
    lam = np.array([[-1.0, 1.0], [1.0, -1.0]])
    a, b = (1 + np.exp(-2 * t)) / 2, (1 - np.exp(-2 * t)) / 2
    np.testing.assert_allclose(expm(lam, t), [[a, b], [b, a]], atol=1e-15)


def test_expm_rejects_nonfinite():
    with pytest.raises(NonFiniteError):
        expm(np.array([[np.nan]]))


def test_gramian_examples():
    S = np.array([[2.0, 1.0], [1.0, 3.0]])
    np.testing.assert_array_equal(gramian_block(np.eye(2), S, 0.0), np.zeros((2, 2)))
    np.testing.assert_allclose(gramian_block(np.zeros((2, 2)), S, 1.7), 1.7 * S, rtol=1e-14)
    for t in (0.1, 1.0, 3.0):
        g = gramian_block(np.array([[-1.0]]), np.array([[1.0]]), t)
        assert abs(g[0, 0] - (1 - np.exp(-2 * t)) / 2) <= 1e-13


def test_gramian_negative_time():
    with pytest.raises(DomainError):
        gramian_block(np.eye(2), np.eye(2), -0.1)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 5.0))
def test_gramian_matches_quadrature(seed, t):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    lam = rng.normal(size=(n, n)) * 0.7
    bvec = rng.normal(size=n)
    S = np.outer(bvec, bvec)
    ref = gramian_quadrature(lam, S, t)
    got = gramian_block(lam, S, t)
    assert np.max(np.abs(got - ref)) <= 1e-8 * max(1.0, np.max(np.abs(ref)))
    np.testing.assert_array_equal(got, got.T)


def test_commutation_with_dynamics():
    lam = dynamics_matrix(zachary())
    for tau in (0.1, 0.6, 2.0):
        err = expm(-lam, tau) @ lam @ expm(lam, tau) - lam
        assert np.max(np.abs(err)) <= 1e-11


def test_solve_linear_examples():
    B = np.arange(6.0).reshape(3, 2)
    np.testing.assert_array_equal(solve_linear(np.eye(3), B), B)
    np.testing.assert_allclose(solve_linear(np.diag([2.0, 4.0]), np.array([2.0, 4.0])), [1.0, 1.0])
    with pytest.raises(SingularMatrixError):
        solve_linear(np.zeros((2, 2)), np.ones(2))


def test_solver_transpose():
    rng = np.random.default_rng(1)
    H = rng.normal(size=(4, 4)) + 4 * np.eye(4)
    b = rng.normal(size=4)
    solver = LinearSolver(H)
    np.testing.assert_allclose(H @ solver.solve(b), b, atol=1e-13)
    np.testing.assert_allclose(H.T @ solver.solve(b, trans=True), b, atol=1e-13)


def test_solver_detects_near_singular():
    H = np.array([[1.0, 1.0], [1.0, 1.0 + 1e-16]])
    with pytest.raises(SingularMatrixError):
        LinearSolver(H)

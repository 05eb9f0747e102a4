"""NNLS contract: nonnegativity, KKT certificates, oracle agreement, errors."""

import numpy as np
import pytest

from loadforge.errors import ConvergenceError, InvalidInputError
from loadforge.factorize import nnls, nnls_matrix

from conftest import fista_nnls_oracle


def kkt_violation(M, b, x):
    """(active violation, zero-coordinate violation) of the gradient M^T(Mx-b)."""
    g = M.T @ (M @ x - b)
    active = np.max(np.abs(g[x > 0]), initial=0.0)
    zero = max(0.0, -np.min(g[x == 0], initial=0.0))
    return active, zero


def test_identity_unconstrained_optimum():
    x = nnls(np.eye(2), np.array([3.0, 5.0]))
    np.testing.assert_allclose(x, [3.0, 5.0], atol=1e-12)


def test_identity_clamps_negative_coordinate():
    x = nnls(np.eye(2), np.array([3.0, -5.0]))
    np.testing.assert_allclose(x, [3.0, 0.0], atol=1e-12)


def test_two_by_two_against_grid_oracle():
    M = np.array([[1.0, 1.0], [1.0, 2.0]])
    b = np.array([1.0, -1.0])
    # dense grid search refined by projected gradient
    grid = np.linspace(0.0, 4.0, 201)
    xx, yy = np.meshgrid(grid, grid)
    objs = ((M[0, 0] * xx + M[0, 1] * yy - b[0]) ** 2
            + (M[1, 0] * xx + M[1, 1] * yy - b[1]) ** 2)
    best = np.unravel_index(np.argmin(objs), objs.shape)
    coarse = np.array([xx[best], yy[best]])
    refined = fista_nnls_oracle(M, b)
    assert np.sum((M @ refined - b) ** 2) <= objs[best] + 1e-12
    x = nnls(M, b)
    np.testing.assert_allclose(x, refined, atol=1e-6)
    assert abs(np.sum((M @ x - b) ** 2) - np.sum((M @ refined - b) ** 2)) <= 1e-6
    assert np.linalg.norm(coarse - x) <= 0.05  # grid is coarse but consistent


def test_kkt_certificate_random_instances():
    rng = np.random.default_rng(11)
    for _ in range(200):
        m = int(rng.integers(1, 11))
        k = int(rng.integers(1, 11))
        M = rng.normal(size=(m, k))
        b = rng.normal(size=m)
        x = nnls(M, b)
        assert (x >= 0).all()
        scale = max(np.max(np.abs(M.T @ b)), 1.0)
        active, zero = kkt_violation(M, b, x)
        assert active <= 1e-8 * scale
        assert zero <= 1e-8 * scale


def test_rejects_non_finite_input():
    with pytest.raises(InvalidInputError):
        nnls(np.array([[1.0, np.nan], [0.0, 1.0]]), np.array([1.0, 1.0]))
    with pytest.raises(InvalidInputError):
        nnls(np.eye(2), np.array([np.inf, 0.0]))


def test_iteration_cap_carries_best_iterate():
    with pytest.raises(ConvergenceError) as info:
        nnls(np.eye(2), np.array([3.0, 5.0]), max_iter=1)
    best = info.value.best
    assert best is not None and best.shape == (2,)
    assert (best >= 0).all()


def test_nnls_matrix_matches_columnwise_solves():
    rng = np.random.default_rng(12)
    M = rng.normal(size=(15, 4))
    B = rng.normal(size=(15, 9))
    X = nnls_matrix(M, B)
    for t in range(B.shape[1]):
        np.testing.assert_allclose(X[:, t], nnls(M, B[:, t]), rtol=1e-9, atol=1e-11)


def test_zero_rhs_gives_zero_solution():
    rng = np.random.default_rng(13)
    M = rng.normal(size=(6, 3))
    np.testing.assert_array_equal(nnls(M, np.zeros(6)), np.zeros(3))

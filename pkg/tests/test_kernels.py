"""Backend equivalence: the numba kernels and the numpy fallbacks must agree."""

import os
import subprocess
import sys

import numpy as np
import pytest

from loadforge import kernels

needs_numba = pytest.mark.skipif(not kernels.NB_IMPLS, reason="numba unavailable")


@needs_numba
def test_nnls_backends_agree():
    rng = np.random.default_rng(3)
    for _ in range(50):
        m = int(rng.integers(2, 25))
        k = int(rng.integers(1, 9))
        M = rng.normal(size=(m, k))
        b = rng.normal(size=m)
        tol = 1e-10 * np.max(np.abs(M.T @ b), initial=0.0)
        x_py, s_py, _ = kernels.PY_IMPLS["nnls_single"](M, b, tol, 3 * k)
        x_nb, s_nb, _ = kernels.NB_IMPLS["nnls_single"](M, b, tol, 3 * k)
        assert s_py == 0 and s_nb == 0
        f_py = np.sum((M @ x_py - b) ** 2)
        f_nb = np.sum((M @ x_nb - b) ** 2)
        np.testing.assert_allclose(f_py, f_nb, rtol=1e-9, atol=1e-12)


@needs_numba
def test_nnls_batch_backends_agree():
    rng = np.random.default_rng(4)
    M = rng.normal(size=(30, 5))
    B = rng.normal(size=(30, 40))
    X_py, s_py = kernels.PY_IMPLS["nnls_batch"](M, B, 15)
    X_nb, s_nb = kernels.NB_IMPLS["nnls_batch"](M, B, 15)
    assert not s_py.any() and not s_nb.any()
    np.testing.assert_allclose(X_py, X_nb, rtol=1e-8, atol=1e-10)


@needs_numba
def test_chain_backends_identical():
    rng = np.random.default_rng(5)
    p_off = rng.uniform(0.05, 0.95, size=(24, 2))
    tau = rng.integers(0, 24, size=20000)
    u = rng.random(20000)
    a = kernels.PY_IMPLS["binary_chain"](p_off, tau, u, 0)
    b = kernels.NB_IMPLS["binary_chain"](p_off, tau, u, 0)
    assert (a == b).all()

    cum = np.cumsum(rng.dirichlet(np.ones(4), size=(24, 4)).transpose(0, 2, 1), axis=1)
    cum = np.ascontiguousarray(cum)
    s_py = kernels.PY_IMPLS["state_chain"](cum, tau, u, 0)
    s_nb = kernels.NB_IMPLS["state_chain"](cum, tau, u, 0)
    assert (s_py == s_nb).all()


@needs_numba
def test_arma_backends_identical():
    rng = np.random.default_rng(6)
    w = rng.normal(size=30000)
    phi = np.array([0.7, 0.1])
    theta = np.array([0.4])
    e_py = kernels.PY_IMPLS["arma_recursion"](phi, theta, w)
    e_nb = kernels.NB_IMPLS["arma_recursion"](phi, theta, w)
    np.testing.assert_allclose(e_py, e_nb, rtol=1e-12, atol=1e-12)


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, LOADFORGE_NUMBA="0")
    out = subprocess.run(
        [sys.executable, "-c", "from loadforge import kernels; print(kernels.BACKEND)"],
        capture_output=True, text=True, env=env, check=True,
    )
    assert out.stdout.strip() == "numpy"

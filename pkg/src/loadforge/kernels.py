"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

The active backend is chosen at import time: numba is used when it is
installed unless the environment variable ``LOADFORGE_NUMBA`` is set to
``0``/``false``/``off``. Both variants stay importable (``PY_IMPLS`` /
``NB_IMPLS``) so they can be benchmarked against each other; see
``benchmarks/benchmark_kernels.py``.

All kernels are pure functions of their arguments. Randomness is injected
as pre-drawn uniform/normal arrays so that results are reproducible and
independent of the backend's RNG.
"""

import os

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False


def _numba_enabled():
    value = os.environ.get("LOADFORGE_NUMBA", "1").strip().lower()
    return value not in ("0", "false", "off", "no")


USE_NUMBA = NUMBA_AVAILABLE and _numba_enabled()


# ---------------------------------------------------------------------------
# Nonnegative least squares (Lawson-Hanson active set)
# ---------------------------------------------------------------------------

def _nnls_single_py(M, b, tol, max_iter):
    """Solve min ||M x - b|| s.t. x >= 0 (vectorized numpy path).

    Returns (x, status, iterations); status 1 means the iteration cap was
    hit and x is the best iterate found so far.
    """
    m, k = M.shape
    x = np.zeros(k)
    passive = np.zeros(k, dtype=bool)
    w = M.T @ b
    iters = 0
    while True:
        candidates = np.where(passive, -np.inf, w)
        j = int(np.argmax(candidates))
        if candidates[j] <= tol:
            break
        passive[j] = True
        while True:
            iters += 1
            if iters > max_iter:
                return x, 1, iters
            idx = np.flatnonzero(passive)
            z = np.zeros(k)
            z[idx] = np.linalg.lstsq(M[:, idx], b, rcond=-1)[0]
            negative = passive & (z <= 0.0)
            if not negative.any():
                x = z
                break
            xneg = x[negative]
            denom = xneg - z[negative]
            ratios = np.where(denom > 0.0, xneg / np.where(denom > 0.0, denom, 1.0), 0.0)
            alpha = ratios.min()
            x = x + alpha * (z - x)
            drop = np.flatnonzero(negative)[ratios <= alpha * (1.0 + 1e-12)]
            passive[drop] = False
            x[~passive] = 0.0
        w = M.T @ (b - M @ x)
    return x, 0, iters


def _nnls_single_loop(M, b, tol, max_iter):
    """Loop-style Lawson-Hanson, written for numba nopython compilation."""
    m, k = M.shape
    x = np.zeros(k)
    passive = np.zeros(k, np.bool_)
    w = np.empty(k)
    for i in range(k):
        acc = 0.0
        for n in range(m):
            acc += M[n, i] * b[n]
        w[i] = acc
    iters = 0
    while True:
        jbest = -1
        wbest = tol
        for i in range(k):
            if not passive[i] and w[i] > wbest:
                wbest = w[i]
                jbest = i
        if jbest < 0:
            break
        passive[jbest] = True
        while True:
            iters += 1
            if iters > max_iter:
                return x, 1, iters
            count = 0
            for i in range(k):
                if passive[i]:
                    count += 1
            idx = np.empty(count, np.int64)
            pos = 0
            for i in range(k):
                if passive[i]:
                    idx[pos] = i
                    pos += 1
            sub = np.empty((m, count))
            for n in range(m):
                for c in range(count):
                    sub[n, c] = M[n, idx[c]]
            zsub = np.linalg.lstsq(sub, b, -1.0)[0]
            all_positive = True
            for c in range(count):
                if zsub[c] <= 0.0:
                    all_positive = False
                    break
            if all_positive:
                for i in range(k):
                    x[i] = 0.0
                for c in range(count):
                    x[idx[c]] = zsub[c]
                break
            alpha = np.inf
            for c in range(count):
                if zsub[c] <= 0.0:
                    xi = x[idx[c]]
                    denom = xi - zsub[c]
                    ratio = xi / denom if denom > 0.0 else 0.0
                    if ratio < alpha:
                        alpha = ratio
            for c in range(count):
                i = idx[c]
                x[i] = x[i] + alpha * (zsub[c] - x[i])
            for c in range(count):
                i = idx[c]
                if zsub[c] <= 0.0:
                    denom = x[i] - zsub[c]
                    ratio = x[i] / denom if denom > 0.0 else 0.0
                    # drop every coordinate that reached the boundary
                    if x[i] <= 0.0 or ratio <= alpha * (1.0 + 1e-12):
                        passive[i] = False
                        x[i] = 0.0
        resid = np.empty(m)
        for n in range(m):
            acc = b[n]
            for i in range(k):
                if x[i] != 0.0:
                    acc -= M[n, i] * x[i]
            resid[n] = acc
        for i in range(k):
            acc = 0.0
            for n in range(m):
                acc += M[n, i] * resid[n]
            w[i] = acc
    return x, 0, iters


def _nnls_batch_py(M, B, max_iter):
    """Column-by-column NNLS: solves min ||M x - B[:, t]|| with x >= 0."""
    k = M.shape[1]
    T = B.shape[1]
    X = np.zeros((k, T))
    status = np.zeros(T, dtype=np.int64)
    for t in range(T):
        b = np.ascontiguousarray(B[:, t])
        tol = 1e-10 * np.max(np.abs(M.T @ b), initial=0.0)
        x, s, _ = _nnls_single_py(M, b, tol, max_iter)
        X[:, t] = x
        status[t] = s
    return X, status


def _nnls_batch_loop(M, B, max_iter):
    m, k = M.shape
    T = B.shape[1]
    X = np.zeros((k, T))
    status = np.zeros(T, np.int64)
    for t in range(T):
        b = np.empty(m)
        for n in range(m):
            b[n] = B[n, t]
        wmax = 0.0
        for i in range(k):
            acc = 0.0
            for n in range(m):
                acc += M[n, i] * b[n]
            if abs(acc) > wmax:
                wmax = abs(acc)
        tol = 1e-10 * wmax
        x, s, _ = _nnls_single_loop(M, b, tol, max_iter)
        for i in range(k):
            X[i, t] = x[i]
        status[t] = s
    return X, status


# ---------------------------------------------------------------------------
# Markov chain sampling
# ---------------------------------------------------------------------------

def _binary_chain_loop(p_off, tau, u, init):
    """Sample a 2-state chain: state(t) ~ Bernoulli(1 - p_off[tau(t), state(t-1)]).

    Inverse-CDF convention (state 0 first) so the general state chain with
    two states reproduces this bit for bit. u is a pre-drawn uniform array;
    u[0] is unused because state(0) = init.
    """
    T = u.shape[0]
    out = np.empty(T, np.int8)
    out[0] = init
    prev = init
    for t in range(1, T):
        s = 0 if u[t] < p_off[tau[t], prev] else 1
        out[t] = s
        prev = s
    return out


def _state_chain_loop(cum, tau, u, init):
    """Sample a general chain by inverse CDF.

    cum[tau, i, j] is the cumulative probability of landing in a state
    <= i given previous state j.
    """
    T = u.shape[0]
    n_states = cum.shape[1]
    out = np.empty(T, np.int64)
    out[0] = init
    prev = init
    for t in range(1, T):
        r = u[t]
        s = n_states - 1
        for i in range(n_states):
            if r < cum[tau[t], i, prev]:
                s = i
                break
        out[t] = s
        prev = s
    return out


# ---------------------------------------------------------------------------
# ARMA recursion
# ---------------------------------------------------------------------------

def _arma_recursion_loop(phi, theta, w):
    """eps(t) = sum_i phi_i eps(t-i) + w(t) + sum_j theta_j w(t-j), zero ICs."""
    p = phi.shape[0]
    q = theta.shape[0]
    n = w.shape[0]
    eps = np.empty(n)
    for t in range(n):
        acc = w[t]
        for j in range(q):
            if t - 1 - j >= 0:
                acc += theta[j] * w[t - 1 - j]
        for i in range(p):
            if t - 1 - i >= 0:
                acc += phi[i] * eps[t - 1 - i]
        eps[t] = acc
    return eps


# ---------------------------------------------------------------------------
# Backend selection
# ---------------------------------------------------------------------------

PY_IMPLS = {
    "nnls_single": _nnls_single_py,
    "nnls_batch": _nnls_batch_py,
    "binary_chain": _binary_chain_loop,
    "state_chain": _state_chain_loop,
    "arma_recursion": _arma_recursion_loop,
}

NB_IMPLS = {}
if NUMBA_AVAILABLE:
    _nnls_single_nb = njit(cache=True)(_nnls_single_loop)
    # the batch loop resolves _nnls_single_loop as a module global when it
    # is compiled, so the jitted single-solve has to be bound first
    _nnls_single_loop = _nnls_single_nb
    _nnls_batch_nb = njit(cache=True)(_nnls_batch_loop)

    NB_IMPLS = {
        "nnls_single": _nnls_single_nb,
        "nnls_batch": _nnls_batch_nb,
        "binary_chain": njit(cache=True)(_binary_chain_loop),
        "state_chain": njit(cache=True)(_state_chain_loop),
        "arma_recursion": njit(cache=True)(_arma_recursion_loop),
    }

ACTIVE_IMPLS = NB_IMPLS if USE_NUMBA else PY_IMPLS
BACKEND = "numba" if USE_NUMBA else "numpy"

nnls_single = ACTIVE_IMPLS["nnls_single"]
nnls_batch = ACTIVE_IMPLS["nnls_batch"]
binary_chain = ACTIVE_IMPLS["binary_chain"]
state_chain = ACTIVE_IMPLS["state_chain"]
arma_recursion = ACTIVE_IMPLS["arma_recursion"]

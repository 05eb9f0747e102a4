import numpy as np
import pytest

from loadforge.simulate import voltage_waveform


@pytest.fixture
def v0_230():
    """Reference 230 V RMS mains period with 200 samples."""
    return voltage_waveform(230.0, 200)


def fista_nnls_oracle(M, b, iters=3000):
    """Accelerated projected-gradient NNLS, independent of the active-set path."""
    G = M.T @ M
    c = M.T @ b
    eig = np.linalg.eigvalsh(G)
    lipschitz = max(float(eig[-1]), 1e-12)
    x = np.zeros(G.shape[0])
    y = x.copy()
    t_k = 1.0
    for _ in range(iters):
        grad = G @ y - c
        x_new = np.maximum(y - grad / lipschitz, 0.0)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k))
        y = x_new + (t_k - 1.0) / t_new * (x_new - x)
        x, t_k = x_new, t_new
    return x

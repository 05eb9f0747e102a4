"""Semi-nonnegative factorization of current waveform matrices.

A current observation matrix I (N samples per mains period x T periods) is
approximated as I ~ S @ A where S (N x K) holds real-valued waveform
signatures and A (K x T) holds nonnegative activations. Signatures of a
trained model are rescaled so that one activation unit corresponds to one
watt of mean power against the reference voltage waveform; the per-period
power of the reconstruction is then exactly the column sum of A.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    ConvergenceError,
    DegenerateActivationsError,
    InvalidInputError,
    NormalizationError,
)

RIDGE_SCALE = 1e-10
NNLS_TOL_SCALE = 1e-10


@dataclass
class CurrentMatrix:
    """Per-period current waveforms, one mains period per column, in amperes."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise InvalidInputError("current matrix must be 2-D (samples x periods)")
        n, t = self.values.shape
        if n < 2 or t < 1:
            raise InvalidInputError(f"current matrix needs N >= 2 and T >= 1, got {n}x{t}")
        if not np.isfinite(self.values).all():
            raise InvalidInputError("current matrix contains non-finite values")

    @property
    def samples_per_period(self):
        return self.values.shape[0]

    @property
    def num_periods(self):
        return self.values.shape[1]


@dataclass
class FactorModel:
    """Signature matrix (N x K) paired with a nonnegative activation matrix (K x T)."""

    signatures: np.ndarray
    activations: np.ndarray

    def __post_init__(self):
        self.signatures = np.asarray(self.signatures, dtype=float)
        self.activations = np.asarray(self.activations, dtype=float)
        if self.signatures.ndim != 2 or self.activations.ndim != 2:
            raise InvalidInputError("signatures and activations must be 2-D")
        if self.signatures.shape[1] != self.activations.shape[0]:
            raise InvalidInputError(
                "component count mismatch: signatures are N x K, activations K x T"
            )
        if not np.isfinite(self.signatures).all() or not np.isfinite(self.activations).all():
            raise InvalidInputError("factor model contains non-finite values")
        if (self.activations < 0).any():
            raise InvalidInputError("activations must be nonnegative")

    @property
    def k(self):
        return self.signatures.shape[1]

    def reconstruction(self):
        return self.signatures @ self.activations


@dataclass
class SignatureBank:
    """Ordered per-category signature matrices sharing the sample count N."""

    categories: list

    def __post_init__(self):
        if not self.categories:
            raise InvalidInputError("signature bank is empty")
        n = None
        cleaned = []
        for cat_id, sig in self.categories:
            sig = np.asarray(sig, dtype=float)
            if sig.ndim != 2:
                raise InvalidInputError(f"signatures for {cat_id!r} must be 2-D")
            if n is None:
                n = sig.shape[0]
            elif sig.shape[0] != n:
                raise InvalidInputError(
                    f"signatures for {cat_id!r} have {sig.shape[0]} samples, expected {n}"
                )
            cleaned.append((cat_id, sig))
        self.categories = cleaned

    @property
    def samples_per_period(self):
        return self.categories[0][1].shape[0]

    def concatenated(self):
        return np.concatenate([sig for _, sig in self.categories], axis=1)

    def row_slices(self):
        """Row ranges of each category inside a concatenated activation matrix."""
        slices = {}
        start = 0
        for cat_id, sig in self.categories:
            stop = start + sig.shape[1]
            slices[cat_id] = slice(start, stop)
            start = stop
        return slices


@dataclass
class SolverOptions:
    rel_tol: float = 1e-8
    max_iters: int = 500
    seed: int = 0


@dataclass
class SnmfResult:
    """Factorization output plus the convergence trace used by diagnostics."""

    model: FactorModel
    objective: list = field(default_factory=list)
    half_step_objective: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    pruned: list = field(default_factory=list)
    snr_db: float = float("nan")


def nnls(M, b, tol=None, max_iter=None):
    """Nonnegative least squares min ||M x - b||_2 s.t. x >= 0.

    Lawson-Hanson active set; the returned solution satisfies the KKT
    conditions up to ``tol`` (default 1e-10 * ||M^T b||_inf).

    Raises
    ------
    InvalidInputError
        If M or b contain non-finite values.
    ConvergenceError
        If the iteration cap (default 3k) is exceeded; carries the best
        iterate in ``.best``.
    """
    M = np.ascontiguousarray(M, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    if M.ndim != 2 or b.ndim != 1 or M.shape[0] != b.shape[0]:
        raise InvalidInputError(f"bad NNLS shapes: M {M.shape}, b {b.shape}")
    if not np.isfinite(M).all() or not np.isfinite(b).all():
        raise InvalidInputError("NNLS input contains non-finite values")
    k = M.shape[1]
    if tol is None:
        tol = NNLS_TOL_SCALE * np.max(np.abs(M.T @ b), initial=0.0)
    if max_iter is None:
        max_iter = 3 * k
    x, status, iters = kernels.nnls_single(M, b, float(tol), int(max_iter))
    if status != 0:
        raise ConvergenceError(
            f"NNLS iteration cap {max_iter} exceeded", best=x, iterations=iters
        )
    return x


def nnls_matrix(M, B, max_iter=None):
    """Solve an independent NNLS problem per column of B; returns K x T."""
    M = np.ascontiguousarray(M, dtype=float)
    B = np.ascontiguousarray(B, dtype=float)
    if not np.isfinite(M).all() or not np.isfinite(B).all():
        raise InvalidInputError("NNLS input contains non-finite values")
    if max_iter is None:
        max_iter = 3 * M.shape[1]
    X, status = kernels.nnls_batch(M, B, int(max_iter))
    if (status != 0).any():
        bad = int(np.flatnonzero(status)[0])
        raise ConvergenceError(
            f"NNLS iteration cap exceeded on period {bad}", best=X, iterations=max_iter
        )
    return X


def solve_signatures(I, A):
    """Exact least-squares signature update S = I A^T (A A^T + ridge)^-1.

    The Gram matrix A A^T is regularized with ridge 1e-10 * trace before
    inversion. A component whose activation row is (numerically) all zero
    makes the problem rank deficient beyond that rescue and raises
    DegenerateActivationsError naming the component.
    """
    values = I.values if isinstance(I, CurrentMatrix) else np.asarray(I, dtype=float)
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[1] != values.shape[1]:
        raise InvalidInputError(f"activation shape {A.shape} does not match T={values.shape[1]}")
    gram = A @ A.T
    diag = np.diag(gram)
    scale = np.max(diag, initial=0.0)
    dead = np.flatnonzero(diag <= 1e-14 * scale) if scale > 0 else np.arange(A.shape[0])
    if dead.size:
        raise DegenerateActivationsError(
            f"activation row {int(dead[0])} is numerically zero", component=int(dead[0])
        )
    ridge = RIDGE_SCALE * np.trace(gram)
    gram_r = gram + ridge * np.eye(gram.shape[0])
    try:
        # gram_r S^T = A I^T   <=>   S = I A^T gram_r^-1
        s_t = np.linalg.solve(gram_r, A @ values.T)
    except np.linalg.LinAlgError as exc:
        worst = int(np.argmin(diag))
        raise DegenerateActivationsError(
            f"activation Gram is singular beyond ridge rescue (component {worst})",
            component=worst,
        ) from exc
    return s_t.T


def reconstruction_snr(I, model):
    """10 log10 of reconstruction energy over residual energy, in dB.

    The numerator is the energy of the reconstruction itself. Zero residual
    returns +inf; zero reconstruction with nonzero residual returns -inf.
    """
    values = I.values if isinstance(I, CurrentMatrix) else np.asarray(I, dtype=float)
    recon = model.reconstruction() if isinstance(model, FactorModel) else np.asarray(model)
    if recon.shape != values.shape:
        raise InvalidInputError(f"shape mismatch: data {values.shape}, model {recon.shape}")
    num = float(np.sum(recon * recon))
    den = float(np.sum((values - recon) ** 2))
    if den == 0.0:
        return float("inf")
    if num == 0.0:
        return float("-inf")
    return 10.0 * np.log10(num / den)


def _init_activations(n_components, num_periods, data_norm, rng):
    # nonnegative part of Gaussian columns, rescaled to the data norm
    a0 = np.maximum(rng.normal(size=(n_components, num_periods)), 0.0)
    norm = np.linalg.norm(a0)
    if norm == 0.0:
        a0 = np.full((n_components, num_periods), 1.0)
        norm = np.linalg.norm(a0)
    return a0 * (data_norm / norm)


def snmf(I, k, opts=None):
    """Alternating coordinate-descent SNMF: min ||I - S A||_F^2 s.t. A >= 0.

    Each iteration solves the signature block exactly (ridge-regularized
    least squares) and the activation block per-column with certified NNLS,
    so the objective is non-increasing at every half step. Components whose
    activation row collapses to zero are pruned and reported in the result.

    Parameters
    ----------
    I : CurrentMatrix
    k : int
        Number of components; must satisfy k <= min(N, T).
    opts : SolverOptions, optional
        Convergence controls and RNG seed for the activation init.
    """
    if not isinstance(I, CurrentMatrix):
        I = CurrentMatrix(np.asarray(I, dtype=float))
    opts = opts or SolverOptions()
    n, t = I.values.shape
    if not 1 <= k <= min(n, t):
        raise InvalidInputError(f"k={k} outside 1..min(N,T)={min(n, t)}")

    rng = np.random.default_rng(opts.seed)
    values = I.values
    a = _init_activations(k, t, np.linalg.norm(values), rng)
    keep = np.arange(k)
    pruned = []
    objective = []
    half_objective = []
    s = None
    prev_obj = None
    converged = False
    iterations = 0

    for iteration in range(opts.max_iters):
        iterations = iteration + 1
        # prune dead components before the Gram inversion
        row_norm = np.linalg.norm(a, axis=1)
        alive = row_norm > 1e-14 * max(np.max(row_norm), 1e-300)
        if not alive.all():
            pruned.extend(int(c) for c in keep[~alive])
            keep = keep[alive]
            a = a[alive]
            if a.shape[0] == 0:
                # every component died: fall back to one zero component
                a = np.zeros((1, t))
                s = np.zeros((n, 1))
                half_objective.append(float(np.sum(values * values)))
                objective.append(half_objective[-1])
                break
        s = solve_signatures(values, a)
        half_objective.append(float(np.sum((values - s @ a) ** 2)))
        a = nnls_matrix(s, values)
        obj = float(np.sum((values - s @ a) ** 2))
        half_objective.append(obj)
        objective.append(obj)
        if prev_obj is not None:
            denom = max(prev_obj, 1e-300)
            if (prev_obj - obj) / denom < opts.rel_tol:
                converged = True
                break
        prev_obj = obj

    row_norm = np.linalg.norm(a, axis=1)
    alive = row_norm > 0
    if not alive.all() and alive.any():
        # a row may die on the very last activation step
        pruned.extend(int(c) for c in keep[~alive])
        s = s[:, alive]
        a = a[alive]

    model = FactorModel(signatures=s, activations=a)
    return SnmfResult(
        model=model,
        objective=objective,
        half_step_objective=half_objective,
        iterations=iterations,
        converged=converged,
        pruned=sorted(pruned),
        snr_db=reconstruction_snr(I, model),
    )


def normalize_model(model, v0):
    """Rescale each (signature, activation) pair to unit power projection.

    After normalization (1/N) sum_n s(n, k) v0(n) = 1 for every component,
    so activations are in watts and the reconstruction is unchanged.

    Raises NormalizationError for components whose projection on v0 is zero
    (no power transfer) or negative (sign flip would need a negative
    activation scale, which the nonnegativity constraint forbids).
    """
    v0 = np.asarray(v0, dtype=float)
    s = model.signatures
    n = s.shape[0]
    if v0.shape != (n,):
        raise InvalidInputError(f"voltage waveform length {v0.shape} != N={n}")
    proj = (s.T @ v0) / n
    v0_norm = np.linalg.norm(v0)
    for comp, c in enumerate(proj):
        sig_norm = np.linalg.norm(s[:, comp])
        cosine = abs(c) * n / (sig_norm * v0_norm) if sig_norm > 0 and v0_norm > 0 else 0.0
        if cosine < 1e-10 or c == 0.0:
            raise NormalizationError(
                f"component {comp} has zero power projection on v0", component=comp
            )
        if c < 0.0:
            raise NormalizationError(
                f"component {comp} has negative power projection on v0", component=comp
            )
    return FactorModel(signatures=s / proj, activations=model.activations * proj[:, None])


def train_category(I_c, k, v0, opts=None):
    """Supervised training on single-category data: SNMF then normalization.

    Returns an SnmfResult whose model is normalized against ``v0``; the
    per-period power of the reconstruction equals the activation column sum.
    """
    result = snmf(I_c, k, opts)
    result.model = normalize_model(result.model, v0)
    return result


def infer_activations(I, bank, max_iter=None):
    """Estimate activations against a fixed concatenated signature bank.

    Each period (column of I) is an independent NNLS problem; returns the
    stacked nonnegative activation matrix of shape (sum_c K_c, T).
    """
    if not isinstance(I, CurrentMatrix):
        I = CurrentMatrix(np.asarray(I, dtype=float))
    stacked = bank.concatenated() if isinstance(bank, SignatureBank) else np.asarray(bank, float)
    if stacked.shape[0] != I.samples_per_period:
        raise InvalidInputError(
            f"bank has {stacked.shape[0]} samples per period, data has {I.samples_per_period}"
        )
    return nnls_matrix(stacked, I.values, max_iter=max_iter)


@dataclass
class KSelection:
    """Outcome of the smallest-k search against an SNR target."""

    result: SnmfResult
    k: int
    snr_db: float
    below_target: bool
    evaluated: list


def select_k(I, snr_target, k_max, opts=None):
    """Smallest k in 1..k_max whose SNMF reconstruction SNR meets the target.

    If no k reaches the target the k_max model is returned with
    ``below_target=True``.
    """
    if not isinstance(I, CurrentMatrix):
        I = CurrentMatrix(np.asarray(I, dtype=float))
    if not np.isfinite(snr_target):
        raise InvalidInputError("snr_target must be finite")
    n, t = I.values.shape
    if not 1 <= k_max <= min(n, t):
        raise InvalidInputError(f"k_max={k_max} outside 1..min(N,T)={min(n, t)}")
    evaluated = []
    last = None
    for k in range(1, k_max + 1):
        last = snmf(I, k, opts)
        evaluated.append((k, last.snr_db))
        if last.snr_db >= snr_target:
            return KSelection(last, k, last.snr_db, False, evaluated)
    return KSelection(last, k_max, last.snr_db, True, evaluated)

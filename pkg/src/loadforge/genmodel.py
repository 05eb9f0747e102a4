"""Generative models for device activations and waveform signatures.

Simple (on/off) activations follow a time-of-day inhomogeneous 2-state
Markov chain; complex activations multiply a learned per-period-of-day
template with log-ARMA noise, optionally split across components by a
Dirichlet draw. Signatures are Gaussian perturbations of a template,
renormalized to unit power projection before use.

Timestamps are plain epoch seconds interpreted in local time: the day
index is ``ts // 86400`` and 1970-01-01 is a Thursday.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidInputError
from .factorize import normalize_model, FactorModel

HOURLY = "hourly"
HALFMINUTE = "halfminute-daytype"

SECONDS_PER_DAY = 86400
SLOT_SECONDS = 30
SLOTS_PER_DAY = SECONDS_PER_DAY // SLOT_SECONDS  # 2880


def regular_timestamps(span_seconds, step=30.0, start=0.0):
    """Uniform timestamp grid covering span_seconds (exclusive of the end)."""
    count = int(round(span_seconds / step))
    if count < 1:
        raise InvalidInputError("span shorter than one step")
    return start + step * np.arange(count)


@dataclass(frozen=True)
class TimePartition:
    """Maps timestamps to periods of the day.

    ``hourly`` has 24 subsets (hour of day). ``halfminute-daytype`` has
    5760 subsets: 2880 thirty-second slots for week days followed by 2880
    for days off (weekends plus any configured holiday day ordinals).
    """

    kind: str
    holidays: frozenset = frozenset()

    def __post_init__(self):
        if self.kind not in (HOURLY, HALFMINUTE):
            raise InvalidInputError(f"unknown partition kind {self.kind!r}")

    @property
    def n_subsets(self):
        return 24 if self.kind == HOURLY else 2 * SLOTS_PER_DAY

    def day_off(self, timestamps):
        days = (np.asarray(timestamps, dtype=np.int64)) // SECONDS_PER_DAY
        weekday = (days + 3) % 7  # epoch day 0 is a Thursday
        off = weekday >= 5
        if self.holidays:
            off |= np.isin(days, np.fromiter(self.holidays, dtype=np.int64))
        return off

    def assign(self, timestamps):
        """Subset index tau for each timestamp."""
        ts = np.asarray(timestamps, dtype=np.int64)
        seconds = ts % SECONDS_PER_DAY
        if self.kind == HOURLY:
            return (seconds // 3600).astype(np.int64)
        slot = seconds // SLOT_SECONDS
        return slot + SLOTS_PER_DAY * self.day_off(ts).astype(np.int64)


@dataclass
class TransitionTable:
    """Per-period-of-day transition matrices gamma[tau, i, j] = P[s(t)=i | s(t-1)=j].

    Entries along axis 1 (the new state) sum to one for every (tau, j).
    ``smoothed[tau, j]`` flags conditioning states that were never observed
    and received the Laplace-smoothed uniform fallback.
    """

    partition: TimePartition
    gamma: np.ndarray
    smoothed: np.ndarray | None = None

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float)
        expected = self.partition.n_subsets
        if self.gamma.ndim != 3 or self.gamma.shape[0] != expected:
            raise InvalidInputError(
                f"gamma must have shape ({expected}, S, S), got {self.gamma.shape}"
            )
        if self.gamma.shape[1] != self.gamma.shape[2]:
            raise InvalidInputError("gamma matrices must be square")
        if not np.isfinite(self.gamma).all():
            raise InvalidInputError("gamma contains non-finite values")
        if (self.gamma < -1e-12).any() or (self.gamma > 1 + 1e-12).any():
            raise InvalidInputError("gamma entries must lie in [0, 1]")
        sums = self.gamma.sum(axis=1)
        if np.max(np.abs(sums - 1.0)) > 1e-9:
            raise InvalidInputError("gamma columns must sum to 1 over the new state")

    @property
    def n_states(self):
        return self.gamma.shape[1]


def threshold_onoff(p, threshold=20.0):
    """Binary on/off states: 1 where the power strictly exceeds the threshold."""
    watts = p.watts if hasattr(p, "watts") else np.asarray(p, dtype=float)
    return (watts > threshold).astype(np.int8)


def infer_transitions(states, timestamps, partition, n_states=None):
    """Maximum-likelihood transition probabilities per period of the day.

    Transition counts are conditioned on the previous state: the (tau, j)
    column is the count of j -> i transitions with t in subset tau divided
    by the count of visits to j there. Unobserved (tau, j) pairs fall back
    to Laplace smoothing (+1 numerator, +2-ish uniform denominator) and are
    flagged in ``smoothed``.
    """
    states = np.asarray(states)
    timestamps = np.asarray(timestamps, dtype=float)
    if states.shape != timestamps.shape:
        raise InvalidInputError("states and timestamps lengths differ")
    if states.size < 2:
        raise InvalidInputError("need at least 2 samples to count transitions")
    if n_states is None:
        n_states = max(2, int(states.max()) + 1)
    if states.min() < 0 or states.max() >= n_states:
        raise InvalidInputError("state values outside 0..n_states-1")
    n_subsets = partition.n_subsets
    tau = partition.assign(timestamps[1:])
    counts = np.zeros((n_subsets, n_states, n_states))
    np.add.at(counts, (tau, states[1:].astype(np.int64), states[:-1].astype(np.int64)), 1.0)
    denom = counts.sum(axis=1, keepdims=True)
    gamma = np.empty_like(counts)
    seen = denom > 0
    np.divide(counts, denom, out=gamma, where=seen)
    gamma[~np.broadcast_to(seen, gamma.shape)] = 0.0
    smoothed = ~seen[:, 0, :]
    if smoothed.any():
        fill = (counts + 1.0) / (denom + n_states)
        mask = np.broadcast_to(~seen, gamma.shape)
        gamma[mask] = fill[mask]
    return TransitionTable(partition=partition, gamma=gamma, smoothed=smoothed)


def sample_onoff(table, timestamps, seed, initial_state=0):
    """Sample a 2-state chain: s(t) ~ Bernoulli(gamma_tau(1, s(t-1))).

    The first output element is ``initial_state``. Deterministic given the
    seed; identical seeds give identical series.
    """
    if table.n_states != 2:
        raise InvalidInputError("sample_onoff needs a 2-state table")
    timestamps = np.asarray(timestamps, dtype=float)
    tau = table.partition.assign(timestamps)
    rng = np.random.default_rng(seed)
    u = rng.random(timestamps.size)
    p_off = np.ascontiguousarray(table.gamma[:, 0, :])
    return kernels.binary_chain(p_off, tau, u, int(initial_state))


@dataclass
class ActivationTemplate:
    """Mean power per period of the day (watts), on a halfminute-daytype grid."""

    partition: TimePartition
    values: np.ndarray
    name: str = ""
    empty_subsets: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.partition.n_subsets,):
            raise InvalidInputError(
                f"template needs {self.partition.n_subsets} values, got {self.values.shape}"
            )
        if not np.isfinite(self.values).all() or (self.values < 0).any():
            raise InvalidInputError("template values must be finite and nonnegative")

    def trace(self, timestamps):
        """Template value at each timestamp."""
        return self.values[self.partition.assign(timestamps)]


def learn_template(p, partition, name=""):
    """Average the power per period of the day: a_hat(tau) = mean_{t in S_tau} p(t).

    Subsets never visited get a zero value and are flagged in
    ``empty_subsets``; negative means (metering noise) are clamped to zero.
    """
    tau = partition.assign(p.timestamps)
    sums = np.zeros(partition.n_subsets)
    counts = np.zeros(partition.n_subsets)
    np.add.at(sums, tau, p.watts)
    np.add.at(counts, tau, 1.0)
    empty = counts == 0
    values = np.zeros(partition.n_subsets)
    np.divide(sums, counts, out=values, where=~empty)
    return ActivationTemplate(
        partition=partition, values=np.maximum(values, 0.0), name=name, empty_subsets=empty
    )


@dataclass(frozen=True)
class ArmaParams:
    """ARMA(p, q) noise parameters; the AR polynomial must be stationary."""

    phi: tuple = ()
    theta: tuple = ()
    sigma_w: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "phi", tuple(float(v) for v in self.phi))
        object.__setattr__(self, "theta", tuple(float(v) for v in self.theta))
        if self.sigma_w < 0:
            raise InvalidInputError("sigma_w must be nonnegative")
        if self.phi:
            # roots of 1 - phi_1 z - ... - phi_p z^p must lie outside |z| = 1
            coeffs = np.r_[-np.asarray(self.phi)[::-1], 1.0]
            roots = np.roots(coeffs)
            if roots.size and np.min(np.abs(roots)) <= 1.0 + 1e-12:
                raise InvalidInputError("AR polynomial is not stationary")


def default_arma_params(log_noise_std=0.05, phi=0.9, theta=0.3):
    """ARMA(1,1) defaults with sigma_w chosen to hit the target process std."""
    variance_gain = (1.0 + 2.0 * phi * theta + theta * theta) / (1.0 - phi * phi)
    return ArmaParams(phi=(phi,), theta=(theta,), sigma_w=log_noise_std / np.sqrt(variance_gain))


def sample_arma(params, length, seed):
    """Simulate the ARMA recursion with Gaussian innovations.

    A burn-in of 10 * (p + q + 1) samples is discarded so the output is
    approximately stationary from the first element.
    """
    if length < 1:
        raise InvalidInputError("length must be positive")
    rng = np.random.default_rng(seed)
    p = len(params.phi)
    q = len(params.theta)
    burn = 10 * (p + q + 1)
    if params.sigma_w == 0.0:
        return np.zeros(length)
    w = rng.normal(0.0, params.sigma_w, size=length + burn)
    eps = kernels.arma_recursion(
        np.asarray(params.phi, dtype=float), np.asarray(params.theta, dtype=float), w
    )
    return eps[burn:]


def sample_complex_activation(template, params, timestamps, seed):
    """Continuously varying activation: a(t) = a_hat(tau(t)) * exp(eps(t))."""
    timestamps = np.asarray(timestamps, dtype=float)
    eps = sample_arma(params, timestamps.size, seed)
    return template.trace(timestamps) * np.exp(eps)


def sample_multisig_activation(template, params, alpha, timestamps, seed,
                               redraw_daily=False):
    """Split a complex activation across K components with a Dirichlet draw.

    a(k, t) = a_hat(tau(t)) * exp(eps(t)) * delta(k) with delta ~
    Dirichlet(alpha). By default delta is drawn once per simulated span
    (it carries no time index); ``redraw_daily`` redraws it per calendar
    day for variability studies. Rows sum to the undivided activation
    exactly.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim != 1 or alpha.size < 1 or (alpha <= 0).any():
        raise InvalidInputError("alpha must be a 1-D positive vector")
    timestamps = np.asarray(timestamps, dtype=float)
    rng = np.random.default_rng(seed)
    total = sample_complex_activation(template, params, timestamps, rng)
    if not redraw_daily:
        delta = rng.dirichlet(alpha)
        return delta[:, None] * total[None, :]
    days = (timestamps.astype(np.int64)) // SECONDS_PER_DAY
    unique_days, inverse = np.unique(days, return_inverse=True)
    deltas = rng.dirichlet(alpha, size=unique_days.size)
    return deltas[inverse].T * total[None, :]


@dataclass
class SignatureTemplate:
    """Mean signature matrix (N x K) and the Gaussian perturbation std."""

    template: np.ndarray
    sigma: float

    def __post_init__(self):
        self.template = np.asarray(self.template, dtype=float)
        if self.template.ndim == 1:
            self.template = self.template[:, None]
        if self.template.ndim != 2:
            raise InvalidInputError("signature template must be N x K")
        if self.sigma < 0:
            raise InvalidInputError("sigma must be nonnegative")

    @property
    def k(self):
        return self.template.shape[1]


def sample_signature(template, v0, seed, normalize=True):
    """Draw s_new(n, k) ~ Normal(template(n, k), sigma^2).

    With ``normalize`` (the default) each drawn column is rescaled to unit
    power projection against ``v0`` so it can be paired with activations
    expressed in watts.
    """
    rng = np.random.default_rng(seed)
    draw = template.template + rng.normal(0.0, template.sigma, size=template.template.shape)
    if not normalize:
        return draw
    dummy = FactorModel(signatures=draw, activations=np.zeros((template.k, 1)))
    return normalize_model(dummy, v0).signatures


def sample_multistate_activation(table, magnitudes, timestamps, seed, initial_state=0):
    """Activations of a multi-state device driven by a (K+1)-state chain.

    State 0 is off; state s >= 1 puts ``magnitudes[s-1]`` watts on
    activation row s-1. At most one row is nonzero per period.
    """
    magnitudes = np.asarray(magnitudes, dtype=float)
    n_states = table.n_states
    if n_states < 2:
        raise InvalidInputError("multistate table needs at least 2 states")
    if magnitudes.shape != (n_states - 1,):
        raise InvalidInputError(f"need {n_states - 1} magnitudes, got {magnitudes.shape}")
    if (magnitudes < 0).any():
        raise InvalidInputError("state magnitudes must be nonnegative")
    timestamps = np.asarray(timestamps, dtype=float)
    tau = table.partition.assign(timestamps)
    rng = np.random.default_rng(seed)
    u = rng.random(timestamps.size)
    cum = np.ascontiguousarray(np.cumsum(table.gamma, axis=1))
    states = kernels.state_chain(cum, tau, u, int(initial_state))
    activations = np.zeros((n_states - 1, timestamps.size))
    on = states > 0
    activations[states[on] - 1, np.flatnonzero(on)] = magnitudes[states[on] - 1]
    return activations

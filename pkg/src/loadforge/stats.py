"""Statistics that discriminate residential from commercial load curves.

All metrics operate on power series (watts at a uniform cadence) or on
current matrices. Distribution metrics (kurtosis, entropy, Laplace scale)
are meant to be applied to the normalized first difference of the power,
which is close to i.i.d. at a 1/30 Hz cadence.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .factorize import CurrentMatrix

SECONDS_PER_DAY = 86400.0


@dataclass
class PowerSeries:
    """Uniformly sampled mean power per period, in watts."""

    timestamps: np.ndarray
    watts: np.ndarray
    sample_interval: float

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        self.watts = np.asarray(self.watts, dtype=float)
        if self.timestamps.ndim != 1 or self.watts.ndim != 1:
            raise InvalidInputError("power series arrays must be 1-D")
        if self.timestamps.shape != self.watts.shape:
            raise InvalidInputError("timestamps and watts lengths differ")
        if self.sample_interval <= 0:
            raise InvalidInputError("sample_interval must be positive")
        if not np.isfinite(self.watts).all():
            raise InvalidInputError("power series contains non-finite values")
        if self.timestamps.size > 1:
            steps = np.diff(self.timestamps)
            bad = np.flatnonzero(np.abs(steps - self.sample_interval) > 1e-6 * self.sample_interval)
            if bad.size:
                t_bad = self.timestamps[bad[0] + 1]
                raise InvalidInputError(
                    f"non-uniform spacing at timestamp {t_bad} (expected {self.sample_interval}s)"
                )

    def __len__(self):
        return self.watts.size

    @property
    def span_seconds(self):
        return self.watts.size * self.sample_interval


def power_from_current(I, v0, sample_interval=30.0, start_time=0.0):
    """Mean active power per period: p(t) = (1/N) sum_n v0(n) I(n, t)."""
    if not isinstance(I, CurrentMatrix):
        I = CurrentMatrix(np.asarray(I, dtype=float))
    v0 = np.asarray(v0, dtype=float)
    n = I.samples_per_period
    if v0.shape != (n,):
        raise InvalidInputError(f"voltage waveform length {v0.size} != N={n}")
    watts = (v0 @ I.values) / n
    timestamps = start_time + sample_interval * np.arange(I.num_periods)
    return PowerSeries(timestamps, watts, sample_interval)


def derivative(p, normalize=False):
    """First difference p(t) - p(t-1); optionally zero-mean/unit-std scaled."""
    if len(p) < 2:
        raise InvalidInputError("derivative needs at least 2 samples")
    d = np.diff(p.watts)
    if normalize:
        d = d - d.mean()
        std = d.std()
        if std > 0:
            d = d / std
    return PowerSeries(p.timestamps[1:], d, p.sample_interval)


def resample(p, new_interval):
    """Aggregate to a coarser cadence by block means; a partial tail is dropped."""
    ratio = new_interval / p.sample_interval
    factor = int(round(ratio))
    if factor < 1 or abs(ratio - factor) > 1e-9:
        raise InvalidInputError(
            f"new interval {new_interval}s is not an integer multiple of {p.sample_interval}s"
        )
    if factor == 1:
        return PowerSeries(p.timestamps.copy(), p.watts.copy(), p.sample_interval)
    blocks = len(p) // factor
    if blocks == 0:
        raise InvalidInputError("series shorter than one resampling block")
    watts = p.watts[: blocks * factor].reshape(blocks, factor).mean(axis=1)
    timestamps = p.timestamps[: blocks * factor : factor]
    return PowerSeries(timestamps, watts, float(new_interval))


def autocorrelation(p, lag_seconds):
    """Pearson correlation of (x_t, x_{t+lag}) over the overlapping window."""
    ratio = lag_seconds / p.sample_interval
    lag = int(round(ratio))
    if abs(ratio - lag) > 1e-9 or lag < 0:
        raise InvalidInputError(f"lag {lag_seconds}s is not a multiple of the sample interval")
    if lag == 0:
        return 1.0
    if lag >= len(p):
        raise InvalidInputError(f"lag {lag_seconds}s exceeds the series span")
    a = p.watts[:-lag]
    b = p.watts[lag:]
    sa = a.std()
    sb = b.std()
    if sa == 0.0 or sb == 0.0:
        return float("nan")
    return float(((a - a.mean()) * (b - b.mean())).mean() / (sa * sb))


def kurtosis(x):
    """Population kurtosis E[(x-mu)^4] / E[(x-mu)^2]^2 (Gaussian -> 3)."""
    x = np.asarray(x, dtype=float)
    centered = x - x.mean()
    m2 = np.mean(centered ** 2)
    if m2 == 0.0:
        return float("nan")
    return float(np.mean(centered ** 4) / m2 ** 2)


def entropy(x, q_low=0.001, q_high=0.999):
    """Differential entropy estimate in nats via a histogram plug-in.

    The sample range is clipped to the [q_low, q_high] quantiles and binned
    with the Freedman-Diaconis width, which keeps heavy-tailed derivative
    distributions from blowing up the bin range.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise InvalidInputError("entropy needs at least 2 samples")
    lo, hi = np.quantile(x, [q_low, q_high])
    if hi <= lo:
        return float("-inf")
    clipped = x[(x >= lo) & (x <= hi)]
    q25, q75 = np.quantile(clipped, [0.25, 0.75])
    width = 2.0 * (q75 - q25) / clipped.size ** (1.0 / 3.0)
    if width <= 0.0:
        width = (hi - lo) / max(int(np.sqrt(clipped.size)), 1)
    bins = int(np.ceil((hi - lo) / width))
    bins = min(max(bins, 1), 100_000)
    counts, edges = np.histogram(clipped, bins=bins, range=(lo, hi))
    probs = counts[counts > 0] / clipped.size
    bin_width = (hi - lo) / bins
    return float(-np.sum(probs * np.log(probs)) + np.log(bin_width))


def laplace_scale(x):
    """Laplace scale MLE: mean absolute deviation around the sample median."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise InvalidInputError("empty series")
    return float(np.mean(np.abs(x - np.median(x))))


def thd(I):
    """Total harmonic distortion per period, in percent.

    The fundamental is bin 1 of the one-sided DFT of each period (one cycle
    per period); the DC bin is excluded from both sums. An all-zero period
    yields NaN.
    """
    if not isinstance(I, CurrentMatrix):
        I = CurrentMatrix(np.asarray(I, dtype=float))
    spectrum = np.fft.rfft(I.values, axis=0)
    energy = np.abs(spectrum) ** 2
    harmonic = energy[2:].sum(axis=0)
    total = energy[1:].sum(axis=0)
    out = np.full(I.num_periods, np.nan)
    ok = total > 0
    out[ok] = 100.0 * np.sqrt(harmonic[ok] / total[ok])
    return out


@dataclass
class MetricReport:
    """Discriminating statistics of one dataset at the configured cadences."""

    kurtosis: float
    entropy_nats: float
    laplace_scale: float
    acf_1day: dict = field(default_factory=dict)
    thd_percent: np.ndarray | None = None

    def rows(self):
        """Flat (metric, value) rows for CSV emission."""
        out = [
            ("kurtosis", self.kurtosis),
            ("entropy_nats", self.entropy_nats),
            ("laplace_scale", self.laplace_scale),
        ]
        for interval in sorted(self.acf_1day):
            out.append((f"acf_1day_{format_interval(interval)}", self.acf_1day[interval]))
        if self.thd_percent is not None:
            finite = self.thd_percent[np.isfinite(self.thd_percent)]
            out.append(("thd_mean_percent", float(finite.mean()) if finite.size else float("nan")))
            out.append(
                ("thd_median_percent", float(np.median(finite)) if finite.size else float("nan"))
            )
        return out


def format_interval(seconds):
    for unit, size in (("d", 86400.0), ("h", 3600.0), ("m", 60.0)):
        if seconds >= size and abs(seconds / size - round(seconds / size)) < 1e-9:
            return f"{int(round(seconds / size))}{unit}"
    return f"{seconds:g}s"


def metric_report(p, resample_intervals=(30.0, 3600.0), distribution_interval=30.0,
                  thd_percent=None):
    """Compute the standard report for a power series.

    Kurtosis, entropy and Laplace scale are taken on the normalized power
    derivative at ``distribution_interval``; the 1-day-lag autocorrelation
    of the normalized derivative is reported per resampling interval.
    """
    base = derivative(resample(p, distribution_interval), normalize=True)
    acf = {}
    for interval in resample_intervals:
        coarse = derivative(resample(p, interval), normalize=True)
        acf[float(interval)] = autocorrelation(coarse, SECONDS_PER_DAY)
    return MetricReport(
        kurtosis=kurtosis(base.watts),
        entropy_nats=entropy(base.watts),
        laplace_scale=laplace_scale(base.watts),
        acf_1day=acf,
        thd_percent=thd_percent,
    )

"""Output analysis for chain traces: batch-means standard errors, ACF and ESS."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from smnreg.trace import ChainTrace

DEFAULT_BATCHES = 30
DEFAULT_LAGS = (1, 5, 10)


def batch_means_se(series, batch_count: int = DEFAULT_BATCHES) -> float:
    """Batch-means Monte Carlo standard error of the sample mean.

    With ``a = batch_count`` batches of size ``b = floor(N / a)`` (trailing
    ``N - a b`` values are dropped),

        SE^2 = b * sum_k (ybar_k - ybar)^2 / ((a - 1) * a * b).
    """
    x = np.asarray(series, dtype=float).ravel()
    if batch_count < 2:
        raise ValueError("batch_count must be at least 2")
    if x.size < 2 * batch_count:
        raise ValueError(f"series of length {x.size} is too short for {batch_count} batches")
    b = x.size // batch_count
    used = batch_count * b
    means = x[:used].reshape(batch_count, b).mean(axis=1)
    var = b * np.sum((means - means.mean()) ** 2) / (batch_count - 1)
    return float(math.sqrt(var / used))


def acf(series, max_lag: int) -> np.ndarray:
    """Biased sample autocorrelations at lags ``0..max_lag``.

    A constant series has autocorrelation 1 at lag 0 and 0 elsewhere.
    """
    x = np.asarray(series, dtype=float).ravel()
    N = x.size
    if N < 10:
        raise ValueError(f"series of length {N} is too short (need at least 10)")
    max_lag = min(int(max_lag), N - 1)
    xc = x - x.mean()
    size = 1 << (2 * N - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1] / N
    if acov[0] <= 0:
        out = np.zeros(max_lag + 1)
        out[0] = 1.0
        return out
    return acov / acov[0]


def ess(series) -> float:
    """Effective sample size ``N / tau`` with an initial-positive-sequence estimate of ``tau``.

    Autocorrelations are summed in adjacent pairs ``rho_{2m} + rho_{2m+1}``
    up to the first negative pair; ``tau = 2 sum(pairs) - 1``.  Capped at N.
    """
    x = np.asarray(series, dtype=float).ravel()
    N = x.size
    rho = acf(x, N - 1)
    if rho.size % 2:
        rho = np.append(rho, 0.0)
    pairs = rho[0::2] + rho[1::2]
    neg = np.nonzero(pairs < 0)[0]
    stop = neg[0] if neg.size else pairs.size
    tau = 2 * pairs[:stop].sum() - 1
    return float(min(N, N / max(tau, 1e-12)))


@dataclass
class SummaryTable:
    """Per-parameter posterior summaries.  NaN marks a quantity the trace is too short for."""

    names: list
    mean: np.ndarray
    sd: np.ndarray
    se: np.ndarray
    ess: np.ndarray
    acf: dict
    length: int
    flags: list = field(default_factory=list)

    def columns(self) -> list:
        return ["parameter", "mean", "sd", "mcse", "ess"] + [f"acf_{k}" for k in self.acf]

    def rows(self):
        for i, name in enumerate(self.names):
            yield [name, self.mean[i], self.sd[i], self.se[i], self.ess[i]] + [v[i] for v in self.acf.values()]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns()) + "\n")
        for row in self.rows():
            buf.write(",".join([row[0]] + [f"{v:.17g}" for v in row[1:]]) + "\n")
        return buf.getvalue()

    def to_text(self) -> str:
        cols = self.columns()
        body = [[row[0]] + [f"{v:.6g}" for v in row[1:]] for row in self.rows()]
        widths = [max(len(c), *(len(r[j]) for r in body)) if body else len(c) for j, c in enumerate(cols)]
        lines = ["  ".join(c.rjust(w) if j else c.ljust(w) for j, (c, w) in enumerate(zip(cols, widths)))]
        for r in body:
            lines.append("  ".join(v.rjust(w) if j else v.ljust(w) for j, (v, w) in enumerate(zip(r, widths))))
        lines.append(f"draws: {self.length}")
        lines.extend(f"note: {f}" for f in self.flags)
        return "\n".join(lines) + "\n"


def summarize(trace: ChainTrace, batch_count: int = DEFAULT_BATCHES,
              lags: Sequence[int] = DEFAULT_LAGS) -> SummaryTable:
    """Summaries over every ``beta`` entry and every lower-triangle ``Sigma`` entry.

    Short traces fall back to ``floor(N / 2)`` batches; below 4 draws the
    standard error is NaN, below 10 the ESS and ACF are NaN.  Each fallback is
    recorded in ``flags``.
    """
    N = len(trace)
    if N == 0:
        raise ValueError("trace is empty")
    values = trace.flat()
    K = values.shape[1]
    flags = []
    mean = values.mean(axis=0)
    sd = values.std(axis=0, ddof=1) if N > 1 else np.full(K, np.nan)

    batches = batch_count
    if N < 2 * batch_count:
        batches = N // 2
        if batches >= 2:
            flags.append(f"trace of {N} draws is short; batch-means SE uses {batches} batches")
    if N < 4 or batches < 2:
        se = np.full(K, np.nan)
        flags.append(f"trace of {N} draws is too short for a batch-means standard error")
    else:
        se = np.array([batch_means_se(values[:, k], batches) for k in range(K)])

    if N < 10:
        ess_v = np.full(K, np.nan)
        acfs = {k: np.full(K, np.nan) for k in lags}
        flags.append(f"trace of {N} draws is too short for ESS and autocorrelations")
    else:
        ess_v = np.array([ess(values[:, k]) for k in range(K)])
        max_lag = max(lags) if lags else 0
        rho = np.array([acf(values[:, k], max_lag) for k in range(K)])
        acfs = {k: (rho[:, k] if k < rho.shape[1] else np.full(K, np.nan)) for k in lags}
    return SummaryTable(trace.names, mean, sd, se, ess_v, acfs, N, flags)

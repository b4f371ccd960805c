"""Kernel density estimation and Monte Carlo quantiles.

The density of a surrogate output m(X) is estimated from a large evaluation
sample v_1..v_N as

    g_hat(y) = (1/(N h)) sum_i K((y - v_i)/h)

with the naive (box) kernel K(u) = 1/2 on [-1, 1] by default; Gaussian and
Epanechnikov kernels are also available.  Quantiles are plug-in order
statistics of the evaluation sample.  All evaluators work off a sorted copy
of the sample, so a point query costs O(log N).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import DomainError, InsufficientDataError, ZeroSpreadError

KERNELS = ("naive", "gauss", "epanechnikov")


@dataclass(frozen=True)
class KdeModel:
    """Sample, bandwidth and kernel tag; values are stored sorted."""

    values: np.ndarray
    bandwidth: float
    kernel: str = "naive"

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        if v.size < 1:
            raise InsufficientDataError("kde needs at least one value")
        if not np.all(np.isfinite(v)):
            raise DomainError("kde values must be finite")
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise DomainError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.kernel not in KERNELS:
            raise DomainError(f"unknown kernel {self.kernel!r}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size


def kde_evaluate(model: KdeModel, y) -> np.ndarray:
    """Density estimate at ``y`` (scalar or array)."""
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 0
    t = np.atleast_1d(y)
    v, h, n = model.values, model.bandwidth, model.n
    if model.kernel == "naive":
        lo = np.searchsorted(v, t - h, side="left")
        hi = np.searchsorted(v, t + h, side="right")
        out = (hi - lo) / (2.0 * n * h)
    elif model.kernel == "epanechnikov":
        out = np.empty(t.shape)
        for i, ti in enumerate(t):
            a = np.searchsorted(v, ti - h, side="left")
            b = np.searchsorted(v, ti + h, side="right")
            u = (ti - v[a:b]) / h
            out[i] = 0.75 * np.sum(1.0 - u * u) / (n * h)
    else:  # gauss
        out = np.empty(t.shape)
        step = max(1, 2**22 // max(n, 1))
        for a in range(0, t.size, step):
            u = (t[a : a + step, None] - v[None, :]) / h
            out[a : a + step] = np.exp(-0.5 * u * u).sum(axis=1) / (
                n * h * math.sqrt(2.0 * math.pi)
            )
    return float(out[0]) if scalar else out


def kde_cdf(model: KdeModel, y) -> np.ndarray:
    """Integral of the density estimate over (-inf, y]; exact per kernel."""
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 0
    t = np.atleast_1d(y)
    v, h, n = model.values, model.bandwidth, model.n
    if model.kernel == "naive":
        # sum of clip(t - v + h, 0, 2h) via sorted prefix sums
        full = np.searchsorted(v, t - h, side="right")
        part = np.searchsorted(v, t + h, side="left")
        prefix = np.concatenate([[0.0], np.cumsum(v)])
        mid = (part - full) * (t + h) - (prefix[part] - prefix[full])
        out = (2.0 * h * full + mid) / (2.0 * n * h)
    elif model.kernel == "epanechnikov":
        out = np.empty(t.shape)
        for i, ti in enumerate(t):
            a = np.searchsorted(v, ti - h, side="left")
            b = np.searchsorted(v, ti + h, side="right")
            u = np.clip((ti - v[a:b]) / h, -1.0, 1.0)
            out[i] = (a + np.sum(0.75 * (u - u**3 / 3.0) + 0.5)) / n
    else:
        out = np.empty(t.shape)
        step = max(1, 2**22 // max(n, 1))
        for a in range(0, t.size, step):
            u = (t[a : a + step, None] - v[None, :]) / h
            out[a : a + step] = ndtr(u).sum(axis=1) / n
    return float(out[0]) if scalar else out


def select_bandwidth(values) -> float:
    """Normal-reference rule h = 1.06 sigma N^(-1/5).

    sigma is the smaller of the sample standard deviation and IQR/1.349;
    a zero candidate falls back to the other, and all-identical values are
    rejected.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size < 2:
        raise InsufficientDataError("bandwidth rule needs at least two values")
    sd = float(np.std(v, ddof=1))
    q1, q3 = np.percentile(v, [25.0, 75.0])
    iqr_sigma = float(q3 - q1) / 1.349
    candidates = [s for s in (sd, iqr_sigma) if s > 0.0]
    if not candidates:
        raise ZeroSpreadError("all values identical; bandwidth rule undefined")
    return 1.06 * min(candidates) * v.size ** (-0.2)


@dataclass(frozen=True)
class QuantileEstimate:
    """Plug-in quantile: level, value and the sample size it came from."""

    level: float
    value: float
    size: int


def _order_index(n: int, alpha: float) -> int:
    """Smallest k with k/n >= alpha (the ceil(n*alpha) order statistic).

    The comparison is done on k/n rather than ceil(n*alpha) so that cases
    like n=20, alpha=0.95 resolve to k=19 as the exact arithmetic demands.
    """
    k = int(math.ceil(n * alpha))
    k = min(max(k, 1), n)
    while k < n and k / n < alpha:
        k += 1
    while k > 1 and (k - 1) / n >= alpha:
        k -= 1
    return k


def mc_quantile(values, alpha: float) -> QuantileEstimate:
    """alpha-quantile as the ceil(N*alpha)-th ascending order statistic."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size < 1:
        raise InsufficientDataError("quantile of an empty sample")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    k = _order_index(v.size, alpha)
    val = float(np.partition(v, k - 1)[k - 1])
    return QuantileEstimate(level=float(alpha), value=val, size=v.size)


def surrogate_density(
    model, inputs, kernel: str = "naive", bandwidth: float | None = None
) -> KdeModel:
    """KDE of m(X) from a surrogate and an input sample.

    ``inputs`` may be an :class:`~uqim.data.InputSample` or a plain array.
    ``bandwidth=None`` applies :func:`select_bandwidth` to the outputs.
    """
    from .data import InputSample

    pts = inputs.points if isinstance(inputs, InputSample) else np.asarray(inputs)
    values = np.asarray(model(pts), dtype=float)
    if bandwidth is None:
        bandwidth = select_bandwidth(values)
    return KdeModel(values=values, bandwidth=bandwidth, kernel=kernel)

"""Minimum pixel dwell time from a single demodulated pixel trace.

Shorter dwell times are emulated by cutting the trace into N consecutive
tau-long segments.  The SNR at tau is the squared mean of the first segment
over the sample variance of the N segment means.  A slope-one line through
log10(SNR) versus log10(tau) crosses SNR = 1 at the minimum dwell time.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateError, DomainError, InsufficientSegmentsError, UsageError


def _samples(trace):
    # accepts a LockinResult (uses I), a PixelTrace-like object or (dt, array)
    if hasattr(trace, "i") and hasattr(trace, "sample_rate"):
        return np.asarray(trace.i, dtype=float), 1.0 / trace.sample_rate
    if hasattr(trace, "samples") and hasattr(trace, "sample_rate"):
        return np.asarray(trace.samples, dtype=float), 1.0 / trace.sample_rate
    dt, x = trace
    return np.asarray(x, dtype=float), float(dt)


def segment_snr(trace, tau, numerator="first"):
    """SNR of a ``tau``-long pixel emulated from ``trace``.

    ``numerator="first"`` uses the first segment's mean; ``"all"`` uses
    the mean over all segments (lower variance, not the default).
    """
    x, dt = _samples(trace)
    m = int(round(tau / dt))
    if m < 2:
        raise UsageError(f"tau={tau:g} s is shorter than two sample periods")
    N = x.size // m
    if N < 10:
        raise InsufficientSegmentsError(f"tau={tau:g} s gives {N} segments; need at least 10")
    means = x[: N * m].reshape(N, m).mean(axis=1)
    var = float(np.var(means, ddof=1))
    if var <= 0:
        raise DegenerateError("segment means have zero spread")
    if numerator == "first":
        head = means[0]
    elif numerator == "all":
        head = means.mean()
    else:
        raise UsageError(f"unknown numerator convention {numerator!r}")
    return float(head * head / var)


def tau_grid(n_samples, dt, n_points=16):
    """Log-spaced dwell times from 4 sample periods to a tenth of the trace."""
    lo, hi = 4, n_samples // 10
    if hi < lo:
        raise InsufficientSegmentsError("trace too short for the dwell-time grid")
    m = np.unique(np.round(np.geomspace(lo, hi, n_points)).astype(int))
    return m * dt


@dataclass
class DwellCurve:
    tau: np.ndarray
    snr: np.ndarray
    intercept: float
    tau_min: float
    residual_rms: float
    slope_free: float
    numerator: str = "first"
    squeezing_db: float | None = None
    poor_fit: bool = False

    def snr_line(self, tau):
        return np.asarray(tau) * 10.0 ** self.intercept

    def rows(self):
        return zip(self.tau, self.snr)


class PoorFitWarning(UserWarning):
    pass


def min_dwell(trace, taus=None, numerator="first", squeezing_db=None, max_residual=0.5):
    """Fit log10(SNR) = log10(tau) + b and return tau_min = 10^-b.

    Also records the unconstrained log-log slope.  A residual RMS above
    ``max_residual`` decades flags a poor fit and emits a warning.
    """
    x, dt = _samples(trace)
    if taus is None:
        taus = tau_grid(x.size, dt)
    taus = np.asarray(taus, dtype=float)
    if taus.size < 8:
        raise UsageError("need at least 8 dwell times")
    if np.any(np.diff(taus) <= 0):
        raise UsageError("dwell times must be strictly increasing")
    snr = np.array([segment_snr((dt, x), t, numerator) for t in taus])
    if np.any(snr <= 0):
        raise DegenerateError("zero SNR at some dwell time; cannot fit in log space")
    lt, ls = np.log10(taus), np.log10(snr)
    b = float(np.mean(ls - lt))
    resid = ls - lt - b
    rms = float(np.sqrt(np.mean(resid ** 2)))
    slope = float(np.polyfit(lt, ls, 1)[0])
    poor = rms > max_residual
    if poor:
        warnings.warn(f"SNR does not scale linearly with dwell time (residual {rms:.2f} decades)",
                      PoorFitWarning, stacklevel=2)
    return DwellCurve(taus, snr, b, 10.0 ** (-b), rms, slope, numerator, squeezing_db, poor)


def quantum_speedup(squeezing_db):
    """Dwell-time ratio (shot-noise / squeezed) and the fractional time saving."""
    if squeezing_db < 0:
        raise DomainError("squeezing must be >= 0 dB")
    ratio = 10.0 ** (squeezing_db / 10.0)
    return ratio, 1.0 - 1.0 / ratio


def video_rate_budget(frame_rate, tau_min):
    """Largest square image side scanned at ``frame_rate`` with ``tau_min`` per pixel.

    Returns ``math.inf`` when the frame rate is zero.
    """
    if frame_rate < 0 or not tau_min > 0:
        raise DomainError("frame rate must be >= 0 and tau_min > 0")
    if frame_rate == 0:
        return math.inf
    return int(math.floor(math.sqrt(1.0 / (frame_rate * tau_min)) + 1e-12))


def calibrated_amplitude(tau_min, sample_variance, sample_rate):
    """SRS amplitude whose demodulated pixel reaches SNR = 1 at ``tau_min``.

    For white input noise the mean of I over tau has variance
    2 sigma^2 / (f_s tau).
    """
    return math.sqrt(2.0 * sample_variance / (sample_rate * tau_min))

"""Per-pixel photocurrent synthesis, resonant detection and lock-in demodulation.

Photocurrent is in arbitrary units where the DC level equals the absorbed
optical power in mW (detected power times quantum efficiency).  Shot noise
is white and Gaussian with per-sample variance ``shot_scale * DC * V``.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy import signal as sps

from .errors import DomainError, IndeterminatePhaseError, SaturationError, UsageError
from .units import to_db

SAMPLE_RATE = 250e6
MODULATION_HZ = 20e6
REPETITION_HZ = 80e6
LOWPASS_HZ = 1e6


@dataclass
class NoiseConfig:
    shot_scale: float = 1.0
    squeezing: float = 1.0
    electronic_db: float | None = -10.0
    spurious_amplitude: float = 0.0
    spurious_phase: float = 0.0
    phase_drift: float = 0.0  # rad / sqrt(s), random walk of the modulation phase
    seed: int = 0

    def __post_init__(self):
        if self.shot_scale < 0:
            raise DomainError("shot_scale must be >= 0")
        if not self.squeezing > 0:
            raise DomainError("squeezing variance V must be > 0")
        if self.phase_drift < 0:
            raise DomainError("phase_drift must be >= 0")

    @property
    def electronic_ratio(self):
        if self.electronic_db is None or self.electronic_db == -math.inf:
            return 0.0
        return 10.0 ** (self.electronic_db / 10.0)

    def sample_variance(self, dc):
        """Total white-noise variance per sample for a photocurrent ``dc``."""
        shot = self.shot_scale * dc
        return shot * (self.squeezing + self.electronic_ratio)


@dataclass
class DetectorModel:
    """Resonant transimpedance detector: cascaded LC band-pass around 20 MHz.

    H(f) = gain / (1 + jQ(f/f0 - f0/f))^stages has unit magnitude and zero
    phase at f0 and vanishes at DC.
    """

    quantum_efficiency: float = 0.82
    max_power_mw: float = 15.0
    center_hz: float = MODULATION_HZ
    q: float = 5.0
    stages: int = 2
    gain: float = 1.0

    def __post_init__(self):
        if not 0 < self.quantum_efficiency <= 1:
            raise DomainError("quantum efficiency must lie in (0, 1]")
        if self.q <= 0 or self.stages < 1:
            raise DomainError("resonance needs q > 0 and at least one stage")

    @property
    def bandwidth_hz(self):
        """Full width at half power of the cascaded response."""
        k = math.sqrt(2.0 ** (1.0 / self.stages) - 1.0)
        return self.center_hz * k / self.q

    def response(self, f):
        f = np.asarray(f, dtype=float)
        out = np.zeros(f.shape, dtype=complex)
        nz = f != 0
        x = self.q * (f[nz] / self.center_hz - self.center_hz / f[nz])
        out[nz] = self.gain / (1.0 + 1j * x) ** self.stages
        return out


@dataclass
class PixelTrace:
    samples: np.ndarray
    sample_rate: float
    modulation_hz: float = MODULATION_HZ
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1:
            raise UsageError("trace samples must be 1-D")
        if self.sample_rate <= 0:
            raise DomainError("sample rate must be > 0")

    @property
    def duration(self):
        return self.samples.size / self.sample_rate

    @property
    def t(self):
        return np.arange(self.samples.size) / self.sample_rate

    def __len__(self):
        return self.samples.size


@dataclass
class LockinResult:
    i: np.ndarray
    q: np.ndarray
    lo_phase: float
    lo_frequency: float
    sample_rate: float
    frequency_mismatch: bool = False

    @property
    def dc(self):
        return float(np.mean(self.i))

    @property
    def snr(self):
        """Per-sample power SNR of the in-phase channel, mean(I)^2 / var(I)."""
        v = float(np.var(self.i, ddof=1))
        return self.dc ** 2 / v if v > 0 else math.inf

    @property
    def snr_db(self):
        return float(to_db(self.snr))


class LockinWarning(UserWarning):
    pass


def config_hash(*configs):
    h = hashlib.sha1()
    for c in configs:
        h.update(repr(sorted(asdict(c).items())).encode())
    return h.hexdigest()[:12]


@lru_cache(maxsize=32)
def _carrier(n, fs, f, phase):
    w = 2.0 * math.pi * f / fs * np.arange(n) + phase
    c, s = np.cos(w), np.sin(w)
    c.flags.writeable = False
    s.flags.writeable = False
    return c, s


def _sample_count(duration, fs):
    return int(math.floor(duration * fs + 1e-6))


def synthesize_photocurrent(amplitude, noise=None, detector=None, duration=1e-3, *,
                            power_mw=5.0, phase=0.0, seed=None, sample_rate=SAMPLE_RATE,
                            modulation_hz=MODULATION_HZ, repetition_hz=REPETITION_HZ,
                            pulse_depth=2.0):
    """Raw photocurrent of one pixel.

    DC level, the fundamental of the pulse train at ``repetition_hz``, the
    SRS tone ``amplitude * cos(2 pi f_mod t + phase)``, an optional coherent
    spurious tone, squeezed shot noise and electronic noise.  ``seed``
    (int, tuple or SeedSequence; defaults to ``noise.seed``) fixes the noise
    realisation; shot-noise draws come first so changing only V rescales
    the same realisation.
    """
    noise = noise or NoiseConfig()
    detector = detector or DetectorModel()
    if power_mw < 0:
        raise DomainError("detected power must be >= 0")
    if power_mw > detector.max_power_mw:
        raise SaturationError(
            f"detected power {power_mw} mW exceeds the {detector.max_power_mw} mW linear range",
            power_mw=power_mw)
    if sample_rate < 10 * modulation_hz:
        raise UsageError("sample rate must be at least 10x the modulation frequency")
    if duration < 10.0 / modulation_hz:
        raise UsageError("trace must span at least 10 modulation periods")

    n = _sample_count(duration, sample_rate)
    rng = np.random.default_rng(noise.seed if seed is None else seed)
    dc = detector.quantum_efficiency * power_mw

    x = rng.standard_normal(n)
    x *= math.sqrt(noise.shot_scale * dc * noise.squeezing)
    if noise.electronic_ratio > 0:
        x += math.sqrt(noise.shot_scale * dc * noise.electronic_ratio) * rng.standard_normal(n)
    x += dc
    if pulse_depth and dc:
        x += pulse_depth * dc * _carrier(n, sample_rate, repetition_hz, 0.0)[0]

    if noise.phase_drift > 0:
        steps = rng.standard_normal(n) * (noise.phase_drift / math.sqrt(sample_rate))
        drift = np.cumsum(steps)
        w = 2.0 * math.pi * modulation_hz / sample_rate * np.arange(n) + drift
        if amplitude:
            x += amplitude * np.cos(w + phase)
        if noise.spurious_amplitude:
            x += noise.spurious_amplitude * np.cos(w + noise.spurious_phase)
    else:
        for amp, ph in ((amplitude, phase), (noise.spurious_amplitude, noise.spurious_phase)):
            if amp:
                c, s = _carrier(n, sample_rate, modulation_hz, 0.0)
                x += amp * (math.cos(ph) * c - math.sin(ph) * s)

    meta = {"seed": repr(noise.seed if seed is None else seed),
            "config": config_hash(noise, detector), "power_mw": power_mw}
    return PixelTrace(x, sample_rate, modulation_hz, meta)


def resonant_detector(trace, detector=None):
    """Apply the detector's band-pass response (circular, via FFT)."""
    detector = detector or DetectorModel()
    n = trace.samples.size
    spec = np.fft.rfft(trace.samples)
    f = np.fft.rfftfreq(n, 1.0 / trace.sample_rate)
    y = np.fft.irfft(spec * detector.response(f), n)
    meta = dict(trace.metadata, detector=True)
    return PixelTrace(y, trace.sample_rate, trace.modulation_hz, meta)


def _decimation(sample_rate, lowpass_hz):
    # Block averaging over 1/(2 f_c) is the low-pass: sinc response, -3 dB at
    # ~0.89 f_c, nulls at multiples of 2 f_c.
    return max(1, int(round(sample_rate / (2.0 * lowpass_hz))))


def lockin_demodulate(trace, lo_frequency=None, lo_phase=0.0, lowpass_hz=LOWPASS_HZ,
                      decimation=None):
    """Dual-quadrature demodulation.

    I = <2 x cos(w t + phi)>, Q = <2 x sin(w t + phi)>, averaged over blocks
    of ``decimation`` samples.  A tone s cos(w t + phi0) gives
    I = s cos(phi0 - phi), Q = s sin(phi - phi0).
    """
    f_lo = trace.modulation_hz if lo_frequency is None else lo_frequency
    dec = decimation or _decimation(trace.sample_rate, lowpass_hz)
    x = trace.samples
    nb = x.size // dec
    if nb < 1:
        raise UsageError("trace shorter than one decimation block")
    n = nb * dec
    c, s = _carrier(x.size, trace.sample_rate, f_lo, 0.0)
    cp, sp = math.cos(lo_phase), math.sin(lo_phase)
    xc = (x[:n] * c[:n]).reshape(nb, dec).mean(axis=1)
    xs = (x[:n] * s[:n]).reshape(nb, dec).mean(axis=1)
    i = 2.0 * (cp * xc - sp * xs)
    q = 2.0 * (sp * xc + cp * xs)
    mismatch = abs(f_lo - trace.modulation_hz) > lowpass_hz
    if mismatch:
        warnings.warn(f"LO at {f_lo:g} Hz is outside the {lowpass_hz:g} Hz low-pass band "
                      f"around the {trace.modulation_hz:g} Hz modulation; signal is suppressed",
                      LockinWarning, stacklevel=2)
    return LockinResult(i, q, float(lo_phase), float(f_lo), trace.sample_rate / dec, mismatch)


def optimize_phase(trace, lo_frequency=None, n_scan=72, lowpass_hz=LOWPASS_HZ):
    """LO phase that puts the coherent component entirely in I with a positive mean.

    A coarse scan of mean(I)^2 is refined by a parabola through the best
    grid point and its neighbours.  Returns a phase in [-pi, pi).
    """
    base = lockin_demodulate(trace, lo_frequency, 0.0, lowpass_hz)
    xi, xq = float(np.mean(base.i)), float(np.mean(base.q))
    # mean I at LO phase phi: xi cos(phi) - xq sin(phi)
    amp = math.hypot(xi, xq)
    nb = base.i.size
    spread = math.sqrt(0.5 * (np.var(base.i, ddof=1) + np.var(base.q, ddof=1))) if nb > 1 else 0.0
    if amp == 0.0 or amp < 3.0 * spread / math.sqrt(nb):
        raise IndeterminatePhaseError(
            f"coherent amplitude {amp:.3g} below 3 sigma ({3 * spread / math.sqrt(nb):.3g})")

    def power(phi):
        return (xi * np.cos(phi) - xq * np.sin(phi)) ** 2

    step = 2.0 * math.pi / n_scan
    grid = -math.pi + step * np.arange(n_scan)
    k = int(np.argmax(power(grid)))
    y0, y1, y2 = power(grid[k] - step), power(grid[k]), power(grid[k] + step)
    denom = y0 - 2.0 * y1 + y2
    offset = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
    phi = grid[k] + step * offset
    # the parabola is only second order; polish with Newton steps on d(power)/dphi
    for _ in range(4):
        m = xi * math.cos(phi) - xq * math.sin(phi)
        dm = -(xi * math.sin(phi) + xq * math.cos(phi))
        d1, d2 = 2.0 * m * dm, 2.0 * (dm * dm - m * m)
        if d2 >= 0:
            break
        phi -= d1 / d2
    if xi * math.cos(phi) - xq * math.sin(phi) < 0:
        phi += math.pi
    return float((phi + math.pi) % (2.0 * math.pi) - math.pi)


def _quadrature_variance(res, quadrature):
    if quadrature == "q":
        return float(np.var(res.q, ddof=1))
    if quadrature == "i":
        return float(np.var(res.i, ddof=1))
    if quadrature == "both":
        return 0.5 * (float(np.var(res.i, ddof=1)) + float(np.var(res.q, ddof=1)))
    raise UsageError(f"unknown quadrature {quadrature!r}")


def squeezing_level(squeezed, reference, quadrature="q", lo_phase=0.0):
    """Noise reduction of ``squeezed`` relative to ``reference`` in dB.

    Accepts raw traces (demodulated identically here) or lock-in results.
    Variances are taken on the signal-free quadrature by default.
    """
    res = []
    for tr in (squeezed, reference):
        if isinstance(tr, PixelTrace):
            tr = lockin_demodulate(tr, lo_phase=lo_phase)
        res.append(tr)
    v_sq = _quadrature_variance(res[0], quadrature)
    v_ref = _quadrature_variance(res[1], quadrature)
    if not v_ref > 1e-300:
        raise DomainError("reference variance is zero")
    if not v_sq > 1e-300:
        raise DomainError("squeezed variance is zero")
    return float(to_db(v_ref / v_sq))


def psd(trace, nperseg=4096):
    """One-sided Welch power spectral density (Hann window)."""
    return sps.welch(trace.samples, fs=trace.sample_rate, nperseg=min(nperseg, trace.samples.size),
                     detrend="constant")


def direct_detection_snr(trace, frequency=None, segment=None, floor_bins=3):
    """Phase-insensitive SNR from the power spectrum peak at the modulation frequency.

    Periodograms over ``segment``-sample blocks (rectangular window, no
    overlap, default: the lock-in decimation length) are averaged; the SNR
    is (peak - floor) / floor with the floor taken from ``floor_bins`` bins
    either side of the peak.
    """
    f0 = trace.modulation_hz if frequency is None else frequency
    L = segment or _decimation(trace.sample_rate, LOWPASS_HZ)
    k = f0 * L / trace.sample_rate
    if abs(k - round(k)) > 1e-9:
        raise UsageError("segment length must hold an integer number of modulation periods")
    k = int(round(k))
    nb = trace.samples.size // L
    blocks = trace.samples[: nb * L].reshape(nb, L)
    spec = np.mean(np.abs(np.fft.rfft(blocks, axis=1)) ** 2, axis=0)
    side = [j for d in range(1, floor_bins + 1) for j in (k - d, k + d) if 0 < j < spec.size]
    floor = float(np.mean(spec[side]))
    return (float(spec[k]) - floor) / floor


def lockin_snr(trace, lo_phase=None):
    """Per-sample SNR of the in-phase lock-in channel at the optimised (or given) phase."""
    phi = optimize_phase(trace) if lo_phase is None else lo_phase
    return lockin_demodulate(trace, lo_phase=phi).snr


def demodulated_noise_variance(sample_variance, sample_rate=SAMPLE_RATE, lo_frequency=MODULATION_HZ,
                               detector=None, lowpass_hz=LOWPASS_HZ, nfft=1 << 16):
    """Predicted per-sample variance of I for white input noise of ``sample_variance``.

    Integrates |H(f)|^2 against the power response of the mixer plus block
    average.  Without a detector this is exactly 2 sigma^2 / decimation.
    """
    dec = _decimation(sample_rate, lowpass_hz)
    j = np.arange(dec)
    g = 2.0 / dec * np.cos(2.0 * math.pi * lo_frequency / sample_rate * j)
    if detector is None:
        return float(sample_variance * np.sum(g * g))
    G = np.fft.fft(g, nfft)
    f = np.fft.fftfreq(nfft, 1.0 / sample_rate)
    H = detector.response(f)
    return float(sample_variance * np.mean(np.abs(H) ** 2 * np.abs(G) ** 2))

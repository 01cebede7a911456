"""Raster-scan acquisition of phantoms through the signal chain, and image analysis."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .chain import (
    LOWPASS_HZ, SAMPLE_RATE, DetectorModel, NoiseConfig, SaturationError, _decimation,
    _sample_count, lockin_demodulate, resonant_detector, synthesize_photocurrent,
)
from .errors import DomainError, InvalidRegionError, SingularMatrixError, UsageError
from .theory import CHEMICALS, DEFAULT_SPECTRA, IlluminationConfig, photodamage_check
from .units import to_db

REFERENCE_SHIFT = 2850.0
REFERENCE_DWELL = 1e-3
REFERENCE_SNR_DB = 14.0


class PhotodamageError(DomainError):
    pass


@dataclass
class ScanConfig:
    size: tuple = (100, 100)
    pitch_nm: float = 100.0
    dwell: float = 1e-3
    line_overhead: float = 0.08
    shift_cm1: float = REFERENCE_SHIFT
    squeeze: bool = True
    pump: bool = True
    seed: int = 0
    stream: int = 0  # independent noise for repeated scans of one field
    synthesis: str = "trace"  # or "baseband"
    detector: bool = True
    workers: int = 1

    def __post_init__(self):
        if not self.dwell > 0:
            raise DomainError("dwell time must be > 0")
        if self.size[0] < 1 or self.size[1] < 1:
            raise DomainError("image must be at least 1x1")
        if self.synthesis not in ("trace", "baseband"):
            raise UsageError(f"unknown synthesis mode {self.synthesis!r}")

    @property
    def wall_time(self):
        rows, cols = self.size
        return rows * (cols * self.dwell + self.line_overhead)


@dataclass
class ScanImage:
    dc: np.ndarray
    snr_db: np.ndarray
    noise_var: np.ndarray
    config: ScanConfig
    support: np.ndarray
    signal_scale: float
    dc_variance: float
    dc_variance_source: str
    expected: np.ndarray = field(repr=False, default=None)
    enhancement_db: float | None = None

    @property
    def wall_time(self):
        return self.config.wall_time

    @property
    def shape(self):
        return self.dc.shape


def signal_map(phantom, shift_cm1, illum, gain, spectra=None):
    """Noiseless SRS amplitude per pixel: K sum_c conc_c S_c(shift) P_pump P_stokes."""
    spectra = spectra or DEFAULT_SPECTRA
    acc = np.zeros(phantom.shape)
    for chem in CHEMICALS:
        acc += phantom.maps[chem] * spectra.value(chem, shift_cm1)
    return gain * illum.pump_mw * illum.stokes_mw * acc


def _noise_for(scan, noise):
    return noise if scan.squeeze else replace(noise, squeezing=1.0)


def _detected_dc(illum, detector):
    return detector.quantum_efficiency * illum.detected_stokes_mw


def predicted_dc_variance(scan, illum, noise, detector=None, sample_rate=SAMPLE_RATE):
    """Variance of a pixel's DC value for white noise: 2 sigma^2 / n_samples.

    The detector has unit gain at the modulation frequency and the pixel
    average is far narrower than its passband, so it drops out.
    """
    detector = detector or DetectorModel()
    nz = _noise_for(scan, noise)
    sigma2 = nz.sample_variance(_detected_dc(illum, detector))
    n = _sample_count(scan.dwell, sample_rate)
    dec = _decimation(sample_rate, LOWPASS_HZ)
    if scan.synthesis == "baseband":
        n = (n // dec) * dec
    return 2.0 * sigma2 / n


def calibrate_gain(phantom, illum, noise, target_db=REFERENCE_SNR_DB, shift_cm1=REFERENCE_SHIFT,
                   dwell=REFERENCE_DWELL, detector=None, spectra=None):
    """Gain K that puts the brightest phantom pixel at ``target_db`` SNR.

    Anchored at the reference shift and dwell with the squeezer on.
    """
    ref = ScanConfig(size=phantom.shape, dwell=dwell, shift_cm1=shift_cm1, squeeze=True)
    peak = float(np.max(signal_map(phantom, shift_cm1, illum, 1.0, spectra)))
    if peak <= 0:
        raise UsageError("phantom has no signal at the calibration shift")
    var = predicted_dc_variance(ref, illum, noise, detector)
    return math.sqrt(10.0 ** (target_db / 10.0) * var) / peak


def _pixel_rng_seed(seed, index, stream=0):
    key = [int(seed), int(index)] if stream == 0 else [int(seed), int(index), int(stream)]
    return np.random.SeedSequence(key)


def _acquire_rows(job):
    rows, amp_rows, scan, illum, noise, detector, cols = job
    nz = _noise_for(scan, noise)
    power = illum.detected_stokes_mw
    dc = np.empty((len(rows), cols))
    var = np.empty((len(rows), cols))
    if scan.synthesis == "baseband":
        dec = _decimation(SAMPLE_RATE, LOWPASS_HZ)
        nb = _sample_count(scan.dwell, SAMPLE_RATE) // dec
        if nb < 2:
            raise UsageError("dwell shorter than two lock-in samples")
        sigma_i = math.sqrt(2.0 * nz.sample_variance(detector.quantum_efficiency * power) / dec)
        spur = nz.spurious_amplitude * math.cos(nz.spurious_phase)
    for a, (row, amps) in enumerate(zip(rows, amp_rows)):
        for col in range(cols):
            seq = _pixel_rng_seed(scan.seed, row * cols + col, scan.stream)
            if scan.synthesis == "baseband":
                # same distribution as block-averaged demodulation of white noise
                rng = np.random.default_rng(seq)
                i = amps[col] + spur + sigma_i * rng.standard_normal(nb)
                dc[a, col] = i.mean()
                var[a, col] = i.var(ddof=1)
                continue
            try:
                tr = synthesize_photocurrent(amps[col], nz, detector, scan.dwell,
                                             power_mw=power, seed=seq)
            except SaturationError as exc:
                exc.pixel = (row, col)
                raise
            if scan.detector:
                tr = resonant_detector(tr, detector)
            res = lockin_demodulate(tr, lo_phase=0.0)
            dc[a, col] = res.dc
            var[a, col] = np.var(res.i, ddof=1)
    return rows[0], dc, var


def acquire_image(phantom, scan=None, illum=None, noise=None, *, gain=None, detector=None,
                  allow_photodamage=False, spectra=None):
    """Raster-scan ``phantom`` and demodulate every pixel.

    Each pixel draws its noise from a stream keyed by ``(scan.seed, pixel
    index, scan.stream)``, so serial and parallel runs (``scan.workers > 1``)
    agree bit for bit.  The SNR map is DC^2 over the DC variance of background pixels
    (falls back to the predicted variance when fewer than 100 exist).
    """
    scan = scan or ScanConfig(size=phantom.shape)
    illum = illum or IlluminationConfig()
    noise = noise or NoiseConfig()
    detector = detector or DetectorModel()
    if tuple(scan.size) != tuple(phantom.shape):
        raise UsageError(f"scan size {scan.size} does not match phantom {phantom.shape}")
    check = photodamage_check(illum)
    if not check.ok and not allow_photodamage:
        raise PhotodamageError(f"intensity exceeds the photodamage threshold by {-check.margin:g} W/um^2")
    if illum.detected_stokes_mw > detector.max_power_mw:
        raise SaturationError(f"detected power {illum.detected_stokes_mw:g} mW exceeds "
                              f"{detector.max_power_mw:g} mW", illum.detected_stokes_mw, (0, 0))
    if gain is None:
        empty = not np.any(phantom.total() > 0)
        gain = 0.0 if empty else calibrate_gain(phantom, illum, noise, detector=detector, spectra=spectra)
    amps = signal_map(phantom, scan.shift_cm1, illum, gain, spectra)
    if not scan.pump:
        amps = np.zeros_like(amps)

    rows, cols = scan.size
    chunk = max(1, rows // max(1, 4 * scan.workers))
    jobs = [(list(range(r0, min(rows, r0 + chunk))), amps[r0:r0 + chunk], scan, illum, noise,
             detector, cols) for r0 in range(0, rows, chunk)]
    dc = np.empty((rows, cols))
    var = np.empty((rows, cols))
    if scan.workers > 1:
        with ProcessPoolExecutor(max_workers=scan.workers) as pool:
            results = list(pool.map(_acquire_rows, jobs))
    else:
        results = [_acquire_rows(j) for j in jobs]
    for r0, d, v in results:
        dc[r0:r0 + d.shape[0]] = d
        var[r0:r0 + d.shape[0]] = v

    support = phantom.support()
    background = ~support
    if background.sum() >= 100:
        dc_var = float(np.var(dc[background], ddof=1))
        source = "background"
    else:
        dc_var = predicted_dc_variance(scan, illum, noise, detector)
        source = "predicted"
    with np.errstate(divide="ignore"):
        snr_db = to_db(np.maximum(dc * dc / dc_var, 1e-30))
    scale = gain * illum.pump_mw * illum.stokes_mw
    return ScanImage(dc, snr_db, var, scan, support, scale, dc_var, source, amps)


@dataclass
class Multispectral:
    images: dict
    matrix: np.ndarray
    rgb: np.ndarray
    concentrations: dict | None = None


def acquire_multispectral(phantom, scan=None, illum=None, noise=None, shifts=None, *, gain=None,
                          detector=None, spectra=None, unmix_maps=True, **kwargs):
    """Images at the three chemical shifts with a shared gain, RGB overlay and unmixed maps."""
    from .theory import CHEMICAL_SHIFTS

    spectra = spectra or DEFAULT_SPECTRA
    illum = illum or IlluminationConfig()
    noise = noise or NoiseConfig()
    scan = scan or ScanConfig(size=phantom.shape)
    shifts = shifts or {c: CHEMICAL_SHIFTS[c] for c in CHEMICALS}
    if gain is None:
        gain = calibrate_gain(phantom, illum, noise, detector=detector, spectra=spectra)
    images = {c: acquire_image(phantom, replace(scan, shift_cm1=s, stream=scan.stream + k),
                               illum, noise, gain=gain, detector=detector, spectra=spectra, **kwargs)
              for k, (c, s) in enumerate(shifts.items())}
    scale = gain * illum.pump_mw * illum.stokes_mw
    M = spectra.matrix([shifts[c] for c in CHEMICALS]) * scale
    rgb = compose_rgb(images["dna"], images["protein"], images["lipid"])
    conc = unmix([images[c] for c in CHEMICALS], M) if unmix_maps else None
    return Multispectral(images, M, rgb, conc)


def region_slices(region):
    x0, y0, x1, y1 = (int(v) for v in region)
    if x1 <= x0 or y1 <= y0:
        raise UsageError(f"empty region {region}")
    return slice(y0, y1), slice(x0, x1)


def measure_enhancement(image_squeezed, image_reference, region, method="pooled", max_overlap=0.0):
    """Quantum enhancement in dB from a background region ``(x0, y0, x1, y1)``.

    ``method="pooled"`` compares the within-pixel variance of the
    demodulated samples averaged over the region; ``method="pixel"``
    compares the spread of the pixel DC values.
    """
    if image_squeezed.shape != image_reference.shape:
        raise UsageError("images differ in size")
    ys, xs = region_slices(region)
    rows, cols = image_squeezed.shape
    if ys.stop > rows or xs.stop > cols or ys.start < 0 or xs.start < 0:
        raise InvalidRegionError(f"region {region} lies outside the {cols}x{rows} image")
    n = (ys.stop - ys.start) * (xs.stop - xs.start)
    if n < 100:
        raise InvalidRegionError(f"region holds {n} pixels; need at least 100")
    for img in (image_squeezed, image_reference):
        if img.support is not None:
            frac = float(np.mean(img.support[ys, xs]))
            if frac > max_overlap:
                raise InvalidRegionError(f"{frac:.0%} of the region overlaps the sample")
    if method == "pooled":
        v_sq = float(np.mean(image_squeezed.noise_var[ys, xs]))
        v_ref = float(np.mean(image_reference.noise_var[ys, xs]))
    elif method == "pixel":
        v_sq = float(np.var(image_squeezed.dc[ys, xs], ddof=1))
        v_ref = float(np.var(image_reference.dc[ys, xs], ddof=1))
    else:
        raise UsageError(f"unknown method {method!r}")
    if v_sq <= 0 or v_ref <= 0:
        raise DomainError("zero noise variance in region")
    return float(to_db(v_ref / v_sq))


def find_background_region(support, size=10):
    """First ``size`` x ``size`` square (corners first) free of sample support."""
    rows, cols = support.shape
    corners = [(0, 0), (cols - size, 0), (0, rows - size), (cols - size, rows - size)]
    candidates = corners + [(x, y) for y in range(0, rows - size + 1, size)
                            for x in range(0, cols - size + 1, size)]
    for x, y in candidates:
        if x < 0 or y < 0:
            continue
        if not support[y:y + size, x:x + size].any():
            return (x, y, x + size, y + size)
    raise InvalidRegionError("no sample-free background region of the requested size")


_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


def contour_mask(image, threshold_db):
    snr = image.snr_db if isinstance(image, ScanImage) else np.asarray(image)
    return snr >= threshold_db


def label_components(mask, min_area=1):
    """4-connected components of ``mask`` with at least ``min_area`` pixels.

    Returns ``(labels, count)`` with components renumbered 1..count.
    """
    labels, n = ndimage.label(mask, structure=_FOUR_CONNECTED)
    if n == 0:
        return labels, 0
    areas = np.bincount(labels.ravel())[1:]
    keep = np.flatnonzero(areas >= min_area) + 1
    remap = np.zeros(n + 1, dtype=int)
    remap[keep] = np.arange(1, keep.size + 1)
    return remap[labels], int(keep.size)


def _renormalize(x):
    x = np.asarray(x, dtype=float)
    lo, hi = x.min(), x.max()
    if hi <= lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def compose_rgb(image_dna, image_protein, image_lipid):
    """RGB overlay: red = DNA, green = lipid, blue = protein, each channel scaled to [0, 1]."""
    chans = [np.asarray(getattr(im, "dc", im), dtype=float) for im in (image_dna, image_lipid, image_protein)]
    if len({c.shape for c in chans}) != 1:
        raise UsageError("channel images differ in size")
    return np.stack([_renormalize(c) for c in chans], axis=-1)


def unmix(images, matrix, names=CHEMICALS, clamp=True, max_condition=1e3):
    """Per-pixel solve of ``matrix @ c = s`` for the three concentration maps.

    ``matrix[i, j]`` is the response of chemical ``j`` at the shift of
    ``images[i]``.  Negative concentrations are clamped to zero.
    """
    M = np.asarray(matrix, dtype=float)
    stack = np.stack([np.asarray(getattr(im, "dc", im), dtype=float) for im in images])
    if M.shape != (stack.shape[0], len(names)) or M.shape[0] != M.shape[1]:
        raise UsageError(f"need a square {len(names)}x{len(names)} spectra matrix and as many images")
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond >= max_condition:
        cols = M / np.linalg.norm(M, axis=0, keepdims=True)
        sim = np.abs(cols.T @ cols) - np.eye(len(names))
        a, b = np.unravel_index(np.argmax(sim), sim.shape)
        raise SingularMatrixError(
            f"spectra matrix condition number {cond:.3g}; {names[a]} and {names[b]} are nearly collinear")
    flat = stack.reshape(stack.shape[0], -1)
    conc = np.linalg.solve(M, flat).reshape(stack.shape)
    if clamp:
        conc = np.maximum(conc, 0.0)
    return dict(zip(names, conc))

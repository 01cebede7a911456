"""SRS signal-to-noise theory, Raman-shift conversions and chemical spectra."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, UsageError

CHEMICALS = ("dna", "protein", "lipid")

#: Raman shifts (cm^-1) dominated by DNA, protein and lipid in the CH stretch band.
CHEMICAL_SHIFTS = {"dna": 2967.0, "protein": 2926.0, "lipid": 2850.0}

PUMP_TUNING_NM = (800.0, 822.0)


# --- SNR versus Stokes-to-pump ratio -------------------------------------

def snr_vs_ratio(r):
    """Normalised power SNR of Stokes-detected SRS at fixed total intensity.

    Signal amplitude goes as I_pump * I_stokes and shot-noise power as
    I_stokes, so SNR ~ I_pump^2 I_stokes = r / (1 + r)^3 for r = I_s / I_p.
    Normalised so the optimum equals one.
    """
    r = np.asarray(r, dtype=float)
    if np.any(~np.isfinite(r)) or np.any(r <= 0):
        raise DomainError("Stokes-to-pump ratio must be finite and > 0")
    s = r / (1.0 + r) ** 3 / (4.0 / 27.0)
    return s if s.ndim else float(s)


def _golden_max(f, a, b, tol):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def optimal_ratio(check=True, tol=1e-6):
    """Stokes-to-pump ratio of maximum SNR (analytically 1/2).

    With ``check`` the value is confirmed by a golden-section search.
    """
    r_star = 0.5
    if check:
        found = _golden_max(snr_vs_ratio, 1e-3, 20.0, tol * 1e-2)
        if abs(found - r_star) > tol:
            raise ArithmeticError(f"golden-section optimum {found} disagrees with 1/2")
    return r_star


# --- wavelength bookkeeping ----------------------------------------------

def raman_shift(pump_nm, stokes_nm=1064.0):
    """Raman shift in cm^-1 between pump and Stokes vacuum wavelengths in nm."""
    pump_nm = np.asarray(pump_nm, dtype=float)
    if np.any(~np.isfinite(pump_nm)) or not np.isfinite(stokes_nm):
        raise DomainError("wavelengths must be finite")
    if np.any(pump_nm <= 0) or np.any(pump_nm >= stokes_nm):
        raise DomainError("need 0 < pump wavelength < Stokes wavelength")
    out = 1e7 / pump_nm - 1e7 / stokes_nm
    return out if out.ndim else float(out)


def pump_for_shift(shift_cm1, stokes_nm=1064.0):
    """Pump wavelength (nm) giving ``shift_cm1`` against the Stokes line."""
    shift = np.asarray(shift_cm1, dtype=float)
    if np.any(~np.isfinite(shift)) or np.any(shift <= 0) or not stokes_nm > 0:
        raise DomainError("shift and Stokes wavelength must be positive")
    out = 1e7 / (shift + 1e7 / stokes_nm)
    return out if out.ndim else float(out)


@dataclass
class IlluminationConfig:
    """Beam parameters at the sample.

    Powers are in mW, intensities in W um^-2, frequencies in MHz.  The
    defaults correspond to imaging at the optimal 0.5 ratio with 75 W um^-2
    at the sample, below the ~80 W um^-2 photodamage threshold.
    """

    stokes_nm: float = 1064.0
    pump_nm: float = 816.43
    stokes_mw: float = 5.8
    pump_mw: float = 11.6
    intensity_w_um2: float = 75.0
    modulation_mhz: float = 20.0
    repetition_mhz: float = 80.0
    damage_threshold_w_um2: float = 80.0
    collection_efficiency: float = 0.92

    def __post_init__(self):
        if self.stokes_mw < 0 or self.pump_mw < 0 or self.intensity_w_um2 < 0:
            raise DomainError("powers and intensities must be >= 0")
        if not 0 < self.pump_nm < self.stokes_nm:
            raise DomainError("pump wavelength must be shorter than the Stokes wavelength")

    @property
    def ratio(self):
        if self.pump_mw == 0:
            return math.inf
        return self.stokes_mw / self.pump_mw

    @property
    def shift_cm1(self):
        return raman_shift(self.pump_nm, self.stokes_nm)

    @property
    def detected_stokes_mw(self):
        return self.stokes_mw * self.collection_efficiency

    def tuned(self, shift_cm1, strict=True):
        """Copy with the pump retuned to ``shift_cm1``."""
        pump = pump_for_shift(shift_cm1, self.stokes_nm)
        lo, hi = PUMP_TUNING_NM
        if strict and not lo - 1e-9 <= pump <= hi + 1e-9:
            raise DomainError(f"shift {shift_cm1} cm^-1 needs pump at {pump:.2f} nm, outside {lo}-{hi} nm")
        return replace(self, pump_nm=pump)


@dataclass(frozen=True)
class PhotodamageCheck:
    ok: bool
    margin: float

    def __bool__(self):
        return self.ok


def photodamage_check(config):
    """Compare the total intensity at the sample with the damage threshold."""
    margin = config.damage_threshold_w_um2 - config.intensity_w_um2
    return PhotodamageCheck(margin >= 0, margin)


# --- Raman spectra --------------------------------------------------------

@dataclass(frozen=True)
class Line:
    center: float
    fwhm: float
    amplitude: float

    def __call__(self, shift):
        x = 2.0 * (np.asarray(shift, dtype=float) - self.center) / self.fwhm
        return self.amplitude / (1.0 + x * x)


def _default_lines(fwhm=35.0, broad_fwhm=150.0, broad_amplitude=0.45):
    # A narrow line plus a broad shoulder sharing its centre: cross-talk at the
    # other two shifts without moving the peak.
    return {
        chem: (Line(c, fwhm, 1.0), Line(c, broad_fwhm, broad_amplitude))
        for chem, c in CHEMICAL_SHIFTS.items()
    }


@dataclass
class RamanSpectrumModel:
    lines: dict = field(default_factory=_default_lines)
    valid_range: tuple = (2700.0, 3200.0)

    def value(self, chemical, shift):
        chem = chemical.lower()
        if chem not in self.lines:
            raise UsageError(f"unknown chemical {chemical!r}; expected one of {sorted(self.lines)}")
        s = np.asarray(shift, dtype=float)
        lo, hi = self.valid_range
        if np.any(s < lo) or np.any(s > hi):
            raise DomainError(f"shift outside modelled range [{lo}, {hi}] cm^-1")
        out = sum(line(s) for line in self.lines[chem])
        return out if np.ndim(out) else float(out)

    def matrix(self, shifts=None, chemicals=CHEMICALS):
        """M[i, j] = spectrum of chemical j at shift i."""
        if shifts is None:
            shifts = [CHEMICAL_SHIFTS[c] for c in chemicals]
        return np.array([[self.value(c, s) for c in chemicals] for s in shifts])

    def table(self, shifts):
        shifts = np.asarray(shifts, dtype=float)
        return np.column_stack([shifts] + [self.value(c, shifts) for c in CHEMICALS])


DEFAULT_SPECTRA = RamanSpectrumModel()


def spectrum_value(chemical, shift, model=None):
    return (model or DEFAULT_SPECTRA).value(chemical, shift)

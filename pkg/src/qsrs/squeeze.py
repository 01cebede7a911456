"""Two-mode Laguerre-Gaussian model of a bright amplitude-squeezed beam.

The OPA output is projected onto the two lowest radial LG modes (p = 0, 1;
l = 0) of width ``w0``.  The pump deamplifies the fundamental by ``a00`` and
amplifies the first radial mode by ``a01`` (intensity factors).  A hard
aperture then clips the beam before an imperfect detector.

All radii are in units of the seed beam radius (``w = 1``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import DomainError, FitError, UsageError
from .units import squeezing_db

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def _check_width(name, value):
    if not np.isfinite(value) or value <= 0:
        raise DomainError(f"{name} must be finite and > 0, got {value!r}")


@dataclass(frozen=True)
class LgBasis:
    """Radial LG modes u_00 and u_10 sharing the width ``w0``."""

    w0: float
    orders: tuple = (0, 1)

    def __post_init__(self):
        _check_width("w0", self.w0)

    def amplitude(self, p, r):
        return lg_radial_amplitude(p, r, self.w0)


@dataclass(frozen=True)
class OpaModel:
    w0: float
    a00: float
    a01: float
    seed_width: float = 1.0

    def __post_init__(self):
        for name in ("w0", "a00", "a01", "seed_width"):
            _check_width(name, getattr(self, name))

    @classmethod
    def identity(cls, w0=1.0):
        return cls(w0, 1.0, 1.0)

    def as_tuple(self):
        return (self.w0, self.a00, self.a01)


#: Parameters that reproduce the measured pumped beam profile.
REFERENCE_MODEL = OpaModel(0.855, 0.6, 3.0)
#: Measured overall detection efficiency of the squeezing setup.
DETECTION_EFFICIENCY = 0.55


@dataclass(frozen=True)
class ModeDecomposition:
    c00: float
    c01: float
    residual: float


@dataclass(frozen=True)
class ApertureFilter:
    r_ap: float
    units: str = "seed_radius"

    def __post_init__(self):
        _check_width("r_ap", self.r_ap)


def lg_radial_amplitude(p, r, w0):
    """L2-normalised radial amplitude of LG mode ``p`` (l = 0) at radius ``r``.

    u_00 = sqrt(2/pi)/w0 * exp(-r^2/w0^2) and u_10 carries the extra factor
    (1 - 2 r^2 / w0^2), so that the integral of |u|^2 2 pi r dr is one.
    """
    if p not in (0, 1):
        raise DomainError(f"only radial orders 0 and 1 are modelled, got p={p!r}")
    _check_width("w0", w0)
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)) or np.any(r < 0):
        raise DomainError("radius must be finite and >= 0")
    x = r * r / (w0 * w0)
    u = SQRT_2_OVER_PI / w0 * np.exp(-x)
    if p == 1:
        u = u * (1.0 - 2.0 * x)
    return u if u.ndim else float(u)


def mode_power_within(p, w0, r_ap):
    """Fraction of the power of mode ``p`` inside a centred aperture of radius ``r_ap``."""
    if p not in (0, 1):
        raise DomainError(f"only radial orders 0 and 1 are modelled, got p={p!r}")
    _check_width("w0", w0)
    if r_ap is None or np.isinf(r_ap):
        return 1.0
    if not np.isfinite(r_ap) or r_ap < 0:
        raise DomainError(f"aperture radius must be >= 0, got {r_ap!r}")
    X = 2.0 * r_ap * r_ap / (w0 * w0)
    if p == 0:
        return -math.expm1(-X)
    return 1.0 - (1.0 + X * X) * math.exp(-X)


def decompose_seed(w0, w=1.0):
    """Project a Gaussian seed of width ``w`` onto the width-``w0`` LG pair.

    Both overlaps are closed form; c01 = c00 * (w0^2 - w^2) / (w^2 + w0^2).
    """
    _check_width("w0", w0)
    _check_width("w", w)
    s = w * w + w0 * w0
    c00 = 2.0 * w * w0 / s
    c01 = c00 * (w0 * w0 - w * w) / s
    residual = max(0.0, 1.0 - c00 * c00 - c01 * c01)
    return ModeDecomposition(c00, c01, residual)


def seed_profile(r, w=1.0):
    """Intensity of the unpumped Gaussian seed (unit total power)."""
    r = np.asarray(r, dtype=float)
    return (2.0 / math.pi) / (w * w) * np.exp(-2.0 * r * r / (w * w))


def _pumped_field(r, w0, a00, a01, w=1.0):
    d = decompose_seed(w0, w)
    return (math.sqrt(a00) * d.c00 * lg_radial_amplitude(0, r, w0)
            + math.sqrt(a01) * d.c01 * lg_radial_amplitude(1, r, w0))


def pumped_profile(model, r, normalize="peak"):
    """Radial intensity of the seed after the OPA.

    ``normalize="peak"`` scales the profile to a maximum of one.
    ``normalize="seed"`` expresses it relative to the on-axis intensity of
    the unpumped seed, which keeps the absolute gain information.
    ``normalize=None`` returns the raw intensity (unit seed power).
    """
    r = np.asarray(r, dtype=float)
    intensity = _pumped_field(r, model.w0, model.a00, model.a01, model.seed_width) ** 2
    if normalize == "peak":
        peak = intensity.max()
        return intensity / peak if peak > 0 else intensity
    if normalize == "seed":
        return intensity / seed_profile(0.0, model.seed_width)
    if normalize is None:
        return intensity
    raise UsageError(f"unknown normalization {normalize!r}")


def deamplification_map(model, r):
    """Ratio of unpumped to pumped intensity; values above one mean deamplification.

    Points where the pumped intensity is negligible are returned as NaN.
    """
    r = np.asarray(r, dtype=float)
    seed = seed_profile(r, model.seed_width)
    pumped = pumped_profile(model, r, normalize=None)
    floor = 1e-12 * max(float(np.max(pumped)), float(seed_profile(0.0, model.seed_width)))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(pumped < floor, np.nan, seed / pumped)
    return ratio


@dataclass
class OpaFit:
    model: OpaModel
    residual_norm: float
    rms: float
    normalization: str
    n_starts: int
    success: bool = True


def _coarse_starts(r, y, norm, fixed, n_keep):
    """Best ``n_keep`` points of a fixed (w0, a00, a01) grid by squared residual."""
    w0s = np.linspace(0.5, 1.5, 21)
    a00s = np.array([fixed]) if fixed is not None else np.linspace(0.1, 1.5, 15)
    a01s = np.linspace(0.25, 6.0, 24)
    W, G0, G1 = (g.ravel() for g in np.meshgrid(w0s, a00s, a01s, indexing="ij"))
    s = 1.0 + W * W
    c00 = 2.0 * W / s
    c01 = c00 * (W * W - 1.0) / s
    x = (r[None, :] / W[:, None]) ** 2
    base = SQRT_2_OVER_PI / W[:, None] * np.exp(-x)
    field = (np.sqrt(G0) * c00)[:, None] * base + (np.sqrt(G1) * c01)[:, None] * base * (1.0 - 2.0 * x)
    m = field ** 2
    m = m / m.max(axis=1, keepdims=True) if norm == "peak" else m / (2.0 / math.pi)
    cost = np.sum((m - y[None, :]) ** 2, axis=1)
    order = np.argsort(cost, kind="stable")[:n_keep]
    return [(W[i], G0[i], G1[i]) for i in order]


def fit_opa(r, intensity, normalization="seed", a00=None, rms_tol=0.05, n_starts=4):
    """Least-squares fit of ``(w0, a00, a01)`` to a measured pumped radial profile.

    With ``normalization="seed"`` the profile is in units of the unpumped
    seed's on-axis intensity and all three parameters are identifiable.  A
    peak-normalised profile only constrains ``w0`` and the ratio
    ``a01 / a00``; in that case ``a00`` must be supplied and is held fixed.

    A deterministic coarse grid over w0 in [0.5, 1.5], a00 in (0, 1.5] and
    a01 in (0, 6] is scanned; its ``n_starts`` best points seed a bounded
    trust-region solver.  Raises :class:`FitError` (carrying the best
    candidate) when no start converges or the RMS residual exceeds ``rms_tol``.
    """
    r = np.asarray(r, dtype=float)
    y = np.asarray(intensity, dtype=float)
    if r.shape != y.shape or r.ndim != 1:
        raise UsageError("radius and intensity must be 1-D arrays of equal length")
    if r.size < 20:
        raise UsageError(f"need at least 20 radial samples, got {r.size}")
    if np.any(~np.isfinite(y)) or np.any(y < 0) or np.any(r < 0):
        raise UsageError("profile samples must be finite and nonnegative")
    if normalization not in ("seed", "peak"):
        raise UsageError(f"unknown normalization {normalization!r}")
    if normalization == "peak" and a00 is None:
        raise UsageError("a peak-normalised profile cannot separate a00 from a01; pass a00")
    fixed = a00
    seed_peak = 2.0 / math.pi

    def residuals(theta):
        w0, g0, g1 = theta if fixed is None else (theta[0], fixed, theta[1])
        m = _pumped_field(r, w0, g0, g1) ** 2
        m = m / m.max() if normalization == "peak" else m / seed_peak
        return m - y

    if fixed is None:
        bounds = ([0.2, 1e-6, 1e-6], [4.0, 20.0, 50.0])
    else:
        bounds = ([0.2, 1e-6], [4.0, 50.0])

    best = None
    n_ok = 0
    for w0, g0, g1 in _coarse_starts(r, y, normalization, fixed, n_starts):
        x0 = [w0, g0, g1] if fixed is None else [w0, g1]
        sol = least_squares(residuals, x0, bounds=bounds, method="trf",
                            x_scale="jac", xtol=1e-12, ftol=1e-12, gtol=1e-12)
        if sol.status <= 0:
            continue
        n_ok += 1
        cost = float(np.sum(sol.fun ** 2))
        if best is None or cost < best[0]:
            best = (cost, sol.x)

    if best is None:
        raise FitError("no starting point converged", None)
    cost, x = best
    params = tuple(x) if fixed is None else (x[0], fixed, x[1])
    rms = math.sqrt(cost / r.size)
    result = OpaFit(OpaModel(*map(float, params)), math.sqrt(cost), rms, normalization, n_ok)
    if rms > rms_tol:
        result.success = False
        raise FitError(f"fit residual RMS {rms:.3g} exceeds tolerance {rms_tol}", result)
    return result


def _transmissions(model, r_ap):
    if isinstance(r_ap, ApertureFilter):
        r_ap = r_ap.r_ap
    if r_ap is None:
        return 1.0, 1.0
    return mode_power_within(0, model.w0, r_ap), mode_power_within(1, model.w0, r_ap)


def detected_variance(model, eta, r_ap=None):
    """Detected amplitude-quadrature variance (shot noise = 1) after aperture and loss.

    Each mode's post-OPA variance equals its intensity gain.  Power clipped
    by the aperture or lying outside the two-mode span is replaced by vacuum.
    """
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"detection efficiency must lie in [0, 1], got {eta!r}")
    d = decompose_seed(model.w0, model.seed_width)
    t0, t1 = _transmissions(model, r_ap)
    f0 = d.c00 * d.c00 * t0
    f1 = d.c01 * d.c01 * t1
    v = model.a00 * f0 + model.a01 * f1 + (1.0 - f0 - f1)
    return eta * v + (1.0 - eta)


@dataclass
class SqueezeCurve:
    radii: np.ndarray
    variance: np.ndarray
    eta: float
    no_aperture_variance: float
    model: OpaModel = field(repr=False, default=None)

    @property
    def squeezing_db(self):
        return squeezing_db(self.variance)

    @property
    def no_aperture_db(self):
        return float(squeezing_db(self.no_aperture_variance))

    def rows(self):
        return zip(self.radii, self.variance, self.squeezing_db)


def sweep_aperture(model, eta, radii):
    radii = np.asarray(radii, dtype=float)
    if radii.size == 0:
        raise UsageError("radii list is empty")
    if np.any(radii <= 0) or np.any(np.diff(radii) < 0):
        raise UsageError("radii must be positive and sorted ascending")
    v = np.array([detected_variance(model, eta, float(ra)) for ra in radii])
    return SqueezeCurve(radii, v, eta, detected_variance(model, eta, None), model)


def optimal_aperture(curve, atol=1e-12):
    """Radius of minimum detected variance; near-ties go to the larger (less lossy) radius."""
    v = np.asarray(curve.variance)
    vmin = v.min()
    candidates = np.flatnonzero(v <= vmin + atol)
    return float(curve.radii[candidates[-1]])

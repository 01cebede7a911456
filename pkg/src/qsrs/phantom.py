"""Synthetic cell phantoms: per-chemical concentration maps built from ellipses.

Phantom description format, one item per line (``#`` starts a comment)::

    size = 100          # pixels per side (or "rows cols")
    pitch_nm = 100
    psf = true
    ellipse cx cy rx ry chem conc     # lengths in um, origin at top-left
    disk cx cy r chem conc

Overlapping shapes add their concentrations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import UsageError
from .theory import CHEMICALS

NUMERICAL_APERTURE = 1.2
STOKES_NM = 1064.0
SUPERSAMPLE = 4


def psf_radius_nm(wavelength_nm=STOKES_NM, na=NUMERICAL_APERTURE):
    """1/e^2 intensity radius of the lateral focal spot."""
    return wavelength_nm / (2.0 * na)


@dataclass(frozen=True)
class Shape:
    kind: str
    cx: float
    cy: float
    rx: float
    ry: float
    chem: str
    conc: float

    def line(self):
        if self.kind == "disk":
            return f"disk {self.cx:g} {self.cy:g} {self.rx:g} {self.chem} {self.conc:g}"
        return f"ellipse {self.cx:g} {self.cy:g} {self.rx:g} {self.ry:g} {self.chem} {self.conc:g}"


@dataclass
class PhantomSpec:
    shapes: list = field(default_factory=list)
    size: tuple = (100, 100)
    pitch_nm: float = 100.0
    psf: bool = True

    def to_text(self):
        lines = [f"size = {self.size[0]} {self.size[1]}", f"pitch_nm = {self.pitch_nm:g}",
                 f"psf = {'true' if self.psf else 'false'}"]
        lines += [s.line() for s in self.shapes]
        return "\n".join(lines) + "\n"


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_phantom_spec(text):
    """Parse the line-oriented phantom description; errors name the line number."""
    if text is None or not text.strip():
        raise UsageError("empty phantom description")
    spec = PhantomSpec()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if "=" in line:
                key, value = (p.strip() for p in line.split("=", 1))
                if key == "size":
                    dims = [int(v) for v in value.replace(",", " ").split()]
                    spec.size = (dims[0], dims[-1])
                elif key == "pitch_nm":
                    spec.pitch_nm = float(value)
                elif key == "psf":
                    spec.psf = _bool(value)
                else:
                    raise ValueError(f"unknown key {key!r}")
                continue
            parts = line.split()
            kind = parts[0].lower()
            if kind == "ellipse" and len(parts) == 7:
                cx, cy, rx, ry = map(float, parts[1:5])
                chem, conc = parts[5].lower(), float(parts[6])
            elif kind == "disk" and len(parts) == 6:
                cx, cy, rx = map(float, parts[1:4])
                ry = rx
                chem, conc = parts[4].lower(), float(parts[5])
            else:
                raise ValueError(f"cannot parse shape {line!r}")
            if chem not in CHEMICALS:
                raise ValueError(f"unknown chemical {chem!r}")
            if rx <= 0 or ry <= 0 or conc < 0:
                raise ValueError("radii must be > 0 and concentration >= 0")
            spec.shapes.append(Shape(kind, cx, cy, rx, ry, chem, conc))
        except (ValueError, IndexError) as exc:
            raise UsageError(f"phantom line {lineno}: {exc}") from None
    return spec


@dataclass
class Phantom:
    maps: dict
    pitch_nm: float
    shapes: list
    blurred: bool
    raw: dict = field(repr=False, default=None)

    @property
    def shape(self):
        return next(iter(self.maps.values())).shape

    def total(self):
        return sum(self.maps.values())

    def support(self, rel=0.01):
        """Pixels where the total concentration exceeds ``rel`` of its maximum."""
        tot = self.total()
        peak = tot.max()
        if peak <= 0:
            return np.zeros(tot.shape, dtype=bool)
        return tot > rel * peak


def _rasterize(shape, rows, cols, pitch_um):
    # fractional coverage from SUPERSAMPLE^2 sub-pixel centres
    k = SUPERSAMPLE
    sub = (np.arange(k) + 0.5) / k
    y0 = max(0, int(math.floor((shape.cy - shape.ry) / pitch_um)) - 1)
    y1 = min(rows, int(math.ceil((shape.cy + shape.ry) / pitch_um)) + 1)
    x0 = max(0, int(math.floor((shape.cx - shape.rx) / pitch_um)) - 1)
    x1 = min(cols, int(math.ceil((shape.cx + shape.rx) / pitch_um)) + 1)
    out = np.zeros((rows, cols))
    if y1 <= y0 or x1 <= x0:
        return out
    ys = ((np.arange(y0, y1)[:, None] + sub[None, :]) * pitch_um).ravel()
    xs = ((np.arange(x0, x1)[:, None] + sub[None, :]) * pitch_um).ravel()
    inside = (((xs[None, :] - shape.cx) / shape.rx) ** 2
              + ((ys[:, None] - shape.cy) / shape.ry) ** 2) <= 1.0
    cover = inside.reshape(y1 - y0, k, x1 - x0, k).mean(axis=(1, 3))
    out[y0:y1, x0:x1] = cover
    return out


def build_phantom(spec, size=None, pitch_nm=None, seed=None, psf=None):
    """Rasterise a phantom description into per-chemical concentration maps.

    ``spec`` is a :class:`PhantomSpec`, its text form, or a list of shapes.
    A description without shapes gives all-zero maps.  ``seed`` is accepted
    for symmetry with the randomised generators and does not affect an
    explicit description.
    """
    if isinstance(spec, str):
        spec = parse_phantom_spec(spec)
    elif isinstance(spec, (list, tuple)):
        spec = PhantomSpec(list(spec))
    elif spec is None:
        raise UsageError("no phantom description given")
    rows, cols = size if size is not None else spec.size
    if isinstance(rows, float) or rows < 1 or cols < 1:
        raise UsageError("phantom size must be at least 1x1 pixels")
    pitch = float(pitch_nm if pitch_nm is not None else spec.pitch_nm)
    blur = spec.psf if psf is None else psf
    pitch_um = pitch * 1e-3
    raw = {c: np.zeros((rows, cols)) for c in CHEMICALS}
    for s in spec.shapes:
        raw[s.chem] += s.conc * _rasterize(s, rows, cols, pitch_um)
    if blur:
        sigma_px = 0.5 * psf_radius_nm() / pitch
        maps = {c: ndimage.gaussian_filter(m, sigma_px, mode="constant") for c, m in raw.items()}
    else:
        maps = {c: m.copy() for c, m in raw.items()}
    return Phantom(maps, pitch, list(spec.shapes), bool(blur), raw)


def default_yeast_spec(seed=None, size=(100, 100), pitch_nm=100.0):
    """A ~6 um yeast cell: protein-rich cytosol, nucleus, three lipid droplets.

    With ``seed`` the droplets are displaced by up to 0.3 um.
    """
    rows, cols = size
    cx, cy = 0.5 * cols * pitch_nm * 1e-3, 0.5 * rows * pitch_nm * 1e-3
    shapes = [
        Shape("ellipse", cx, cy, 3.0, 2.7, "protein", 1.0),
        Shape("ellipse", cx, cy, 3.0, 2.7, "dna", 0.25),
        Shape("ellipse", cx, cy, 3.0, 2.7, "lipid", 0.2),
        Shape("disk", cx, cy + 0.6, 0.9, 0.9, "dna", 1.2),
        Shape("disk", cx, cy + 0.6, 0.9, 0.9, "protein", 0.3),
        Shape("disk", cx, cy + 0.6, 0.9, 0.9, "lipid", 1.6),
    ]
    droplets = [(1.6, -1.6), (-1.5, -1.4), (2.1, 0.6)]
    rng = np.random.default_rng(seed) if seed is not None else None
    for dx, dy in droplets:
        if rng is not None:
            dx += rng.uniform(-0.3, 0.3)
            dy += rng.uniform(-0.3, 0.3)
        shapes.append(Shape("disk", cx + dx, cy + dy, 0.4, 0.4, "lipid", 2.5))
    return PhantomSpec(shapes, (rows, cols), pitch_nm, True)


def unmixing_test_spec(size=(100, 100), pitch_nm=100.0, radius_um=2.0):
    """Three disks, one chemical each, for checking linear unmixing."""
    rows, cols = size
    w, h = cols * pitch_nm * 1e-3, rows * pitch_nm * 1e-3
    shapes = [
        Shape("disk", 0.3 * w, 0.35 * h, radius_um, radius_um, "dna", 1.0),
        Shape("disk", 0.7 * w, 0.35 * h, radius_um, radius_um, "protein", 1.0),
        Shape("disk", 0.5 * w, 0.7 * h, radius_um, radius_um, "lipid", 1.0),
    ]
    return PhantomSpec(shapes, (rows, cols), pitch_nm, True)

"""Flat ``key = value`` run configuration covering every tunable.

Unknown keys are rejected.  :meth:`RunConfig.resolved_text` lists every key
with the value in force, defaults included, and is what gets hashed and
echoed next to each run's outputs.
"""

from __future__ import annotations

import hashlib
import math
from pathlib import Path

from .chain import DetectorModel, NoiseConfig
from .errors import UsageError
from .imaging import ScanConfig
from .squeeze import OpaModel
from .theory import IlluminationConfig

DEFAULTS = {
    "seed": 0,
    # OPA model and squeezing sweep
    "opa.w0": 0.855,
    "opa.a00": 0.6,
    "opa.a01": 3.0,
    "opa.normalization": "seed",
    "opa.rms_tol": 0.05,
    "squeeze.eta": 0.55,
    "squeeze.r_min": 0.1,
    "squeeze.r_max": 3.0,
    "squeeze.points": 291,
    # Stokes-to-pump ratio sweep
    "snr.r_min": 0.07,
    "snr.r_max": 10.0,
    "snr.points": 400,
    # beams at the sample
    "illum.stokes_nm": 1064.0,
    "illum.pump_nm": 816.43,
    "illum.stokes_mw": 5.8,
    "illum.pump_mw": 11.6,
    "illum.intensity_w_um2": 75.0,
    "illum.damage_threshold_w_um2": 80.0,
    "illum.collection_efficiency": 0.92,
    # noise and detector
    "noise.squeezing_db": 1.1,
    "noise.shot_scale": 1.0,
    "noise.electronic_db": -10.0,
    "noise.spurious_amplitude": 0.0,
    "noise.spurious_phase": 0.0,
    "noise.phase_drift": 0.0,
    "detector.quantum_efficiency": 0.82,
    "detector.max_power_mw": 15.0,
    "detector.q": 5.0,
    "detector.stages": 2,
    # lock-in demonstration
    "lockin.duration_s": 1e-3,
    "lockin.power_mw": 5.0,
    "lockin.amplitude": 1.0,
    "lockin.trials": 100,
    "lockin.csv_trace": False,
    # raster scan
    "scan.rows": 100,
    "scan.cols": 100,
    "scan.pitch_nm": 100.0,
    "scan.dwell_s": 1e-3,
    "scan.line_overhead_s": 0.08,
    "scan.shift_cm1": 2850.0,
    "scan.squeeze": True,
    "scan.synthesis": "trace",
    "scan.detector": True,
    "scan.workers": 1,
    "image.phantom": "",
    "image.target_snr_db": 14.0,
    "image.threshold_db": 10.5,
    "image.min_area": 12,
    "image.enhance_region": "",
    "image.allow_photodamage": False,
    # dwell analysis
    "dwell.points": 16,
    "dwell.numerator": "first",
    "dwell.max_residual": 0.5,
    "dwell.frame_rate_hz": 50.0,
}


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _coerce(key, text):
    default = DEFAULTS[key]
    text = text.strip()
    if key == "noise.electronic_db" and text.lower() in ("none", "off", "-inf"):
        return None
    if isinstance(default, bool):
        return _parse_bool(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        v = float(text)
        if math.isnan(v):
            raise ValueError("NaN not allowed")
        return v
    return text


def _render(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


class RunConfig:
    def __init__(self, values=None):
        self.values = dict(DEFAULTS)
        for k, v in (values or {}).items():
            self.set(k, v)

    def set(self, key, value):
        if key not in DEFAULTS:
            raise UsageError(f"unknown config key {key!r}")
        if isinstance(value, str):
            try:
                value = _coerce(key, value)
            except ValueError as exc:
                raise UsageError(f"bad value for {key}: {exc}") from None
        self.values[key] = value

    def __getitem__(self, key):
        return self.values[key]

    @classmethod
    def from_text(cls, text, source="<config>"):
        cfg = cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{source}:{lineno}: expected key = value")
            key, value = (p.strip() for p in line.split("=", 1))
            try:
                cfg.set(key, value)
            except UsageError as exc:
                raise UsageError(f"{source}:{lineno}: {exc}") from None
        return cfg

    @classmethod
    def from_file(cls, path):
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
        return cls.from_text(text, str(path))

    def resolved_text(self):
        return "".join(f"{k} = {_render(self.values[k])}\n" for k in sorted(self.values))

    def digest(self, n=10):
        return hashlib.sha256(self.resolved_text().encode()).hexdigest()[:n]

    # builders for the module-level config objects

    def opa_model(self):
        return OpaModel(self["opa.w0"], self["opa.a00"], self["opa.a01"])

    def illumination(self):
        keys = ("stokes_nm", "pump_nm", "stokes_mw", "pump_mw", "intensity_w_um2",
                "damage_threshold_w_um2", "collection_efficiency")
        return IlluminationConfig(**{k: self[f"illum.{k}"] for k in keys})

    def noise(self, squeeze=True):
        v = 10.0 ** (-self["noise.squeezing_db"] / 10.0) if squeeze else 1.0
        return NoiseConfig(shot_scale=self["noise.shot_scale"], squeezing=v,
                           electronic_db=self["noise.electronic_db"],
                           spurious_amplitude=self["noise.spurious_amplitude"],
                           spurious_phase=self["noise.spurious_phase"],
                           phase_drift=self["noise.phase_drift"], seed=self["seed"])

    def detector(self):
        return DetectorModel(quantum_efficiency=self["detector.quantum_efficiency"],
                             max_power_mw=self["detector.max_power_mw"],
                             q=self["detector.q"], stages=self["detector.stages"])

    def scan(self, **overrides):
        kw = dict(size=(self["scan.rows"], self["scan.cols"]), pitch_nm=self["scan.pitch_nm"],
                  dwell=self["scan.dwell_s"], line_overhead=self["scan.line_overhead_s"],
                  shift_cm1=self["scan.shift_cm1"], squeeze=self["scan.squeeze"], seed=self["seed"],
                  synthesis=self["scan.synthesis"], detector=self["scan.detector"],
                  workers=self["scan.workers"])
        kw.update(overrides)
        return ScanConfig(**kw)

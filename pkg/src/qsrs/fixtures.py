"""Deterministic generators for the bundled example data."""

from __future__ import annotations

from importlib import resources

import numpy as np

from .chain import DetectorModel, NoiseConfig, lockin_demodulate, synthesize_photocurrent
from .dwell import calibrated_amplitude
from .squeeze import REFERENCE_MODEL, pumped_profile

PROFILE_RADII = np.linspace(0.0, 2.5, 301)
PROFILE_NOISE = 0.01
PIXEL_TAU_MIN = 3.05e-6
PIXEL_SQUEEZING_DB = 1.1
PIXEL_POWER_MW = 5.0
PIXEL_SEED = 9


def synthetic_profile(model=REFERENCE_MODEL, r=PROFILE_RADII):
    return r, pumped_profile(model, r, normalize="seed")


def noisy_profile(model=REFERENCE_MODEL, r=PROFILE_RADII, rel_noise=PROFILE_NOISE, seed=0):
    """Profile with multiplicative Gaussian noise of relative size ``rel_noise``."""
    r, y = synthetic_profile(model, r)
    rng = np.random.default_rng(seed)
    return r, np.maximum(y * (1.0 + rel_noise * rng.standard_normal(y.size)), 0.0)


def pixel_trace(tau_min=PIXEL_TAU_MIN, squeezing_db=PIXEL_SQUEEZING_DB, duration=1e-3, seed=PIXEL_SEED,
                power_mw=PIXEL_POWER_MW, noise_factor=1.0):
    """Demodulated 1 ms trace of a squeezed pixel whose SRS amplitude gives SNR = 1 at ``tau_min``.

    ``noise_factor`` multiplies the noise power afterwards (e.g. to remove
    the squeezing) without changing the amplitude or the random draws.
    """
    qe = DetectorModel().quantum_efficiency
    noise = NoiseConfig(squeezing=10.0 ** (-squeezing_db / 10.0) * noise_factor, electronic_db=None)
    var = noise.sample_variance(qe * power_mw)
    amp = calibrated_amplitude(tau_min, var / noise_factor, 250e6)
    tr = synthesize_photocurrent(amp, noise, None, duration, power_mw=power_mw, seed=seed)
    return lockin_demodulate(tr, lo_phase=0.0)


def data_path(name):
    return resources.files("qsrs") / "data" / name


def write_bundled(directory):
    """Regenerate the bundled example files into ``directory``."""
    from pathlib import Path

    from . import io

    d = Path(directory)
    io.write_csv(d / "opa_profile.csv", ["r", "intensity"], zip(*synthetic_profile()))
    io.write_csv(d / "opa_profile_noisy.csv", ["r", "intensity"], zip(*noisy_profile()))
    res = pixel_trace()
    t = np.arange(res.i.size) / res.sample_rate
    io.write_csv(d / "squeezed_pixel.csv", ["t_s", "dc"], zip(t, res.i))

"""Simulation and analysis toolkit for quantum-enhanced stimulated Raman scattering microscopy."""

from .chain import (
    DetectorModel, LockinResult, NoiseConfig, PixelTrace, direct_detection_snr, lockin_demodulate,
    optimize_phase, resonant_detector, squeezing_level, synthesize_photocurrent,
)
from .dwell import DwellCurve, min_dwell, quantum_speedup, segment_snr, video_rate_budget
from .errors import (
    DegenerateError, DomainError, FitError, IndeterminatePhaseError, InsufficientSegmentsError,
    InvalidRegionError, SaturationError, SingularMatrixError, UsageError,
)
from .imaging import (
    PhotodamageError, ScanConfig, ScanImage, acquire_image, compose_rgb, contour_mask,
    label_components, measure_enhancement, unmix,
)
from .phantom import Phantom, build_phantom, default_yeast_spec
from .squeeze import (
    OpaModel, SqueezeCurve, decompose_seed, detected_variance, fit_opa, optimal_aperture,
    pumped_profile, sweep_aperture,
)
from .theory import (
    IlluminationConfig, optimal_ratio, photodamage_check, pump_for_shift, raman_shift,
    snr_vs_ratio, spectrum_value,
)

__version__ = "0.1.0"

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from qsrs.errors import DomainError, UsageError
from qsrs.theory import (
    CHEMICAL_SHIFTS, CHEMICALS, DEFAULT_SPECTRA, IlluminationConfig, optimal_ratio,
    photodamage_check, pump_for_shift, raman_shift, snr_vs_ratio, spectrum_value,
)


def test_snr_peak_is_one_at_half():
    assert snr_vs_ratio(0.5) == pytest.approx(1.0)
    r = np.geomspace(0.07, 10, 2001)
    assert r[np.argmax(snr_vs_ratio(r))] == pytest.approx(0.5, abs=0.005)


def test_optimum_matches_bounded_scalar_search():
    res = minimize_scalar(lambda r: -snr_vs_ratio(r), bounds=(0.01, 10), method="bounded",
                          options={"xatol": 1e-9})
    assert res.x == pytest.approx(optimal_ratio(), abs=1e-6)


def test_snr_ratio_between_half_and_tenth():
    assert snr_vs_ratio(0.5) / snr_vs_ratio(0.1) == pytest.approx(1.9719, abs=1e-4)


@pytest.mark.parametrize("bad", [0.0, -1.0, np.inf, np.nan])
def test_snr_domain(bad):
    with pytest.raises(DomainError):
        snr_vs_ratio(bad)


def test_pump_for_lipid_shift():
    assert pump_for_shift(2850, 1064) == pytest.approx(816.4, abs=0.1)
    assert raman_shift(822) == pytest.approx(2766.95, abs=0.01)


@given(st.floats(500.0, 4000.0))
def test_shift_round_trip(shift):
    assert raman_shift(pump_for_shift(shift)) == pytest.approx(shift, rel=1e-9, abs=1e-9)


def test_raman_domain():
    with pytest.raises(DomainError):
        raman_shift(1100)
    with pytest.raises(DomainError):
        pump_for_shift(-5)


def test_chemical_shifts_reachable_with_pump_tuning():
    ill = IlluminationConfig()
    for shift in CHEMICAL_SHIFTS.values():
        assert 800 <= ill.tuned(shift).pump_nm <= 822
    with pytest.raises(DomainError):
        ill.tuned(3300)


def test_default_illumination_is_safe_and_optimal():
    ill = IlluminationConfig()
    assert ill.ratio == pytest.approx(0.5)
    assert ill.shift_cm1 == pytest.approx(2850, abs=0.1)
    assert photodamage_check(ill).ok
    assert ill.detected_stokes_mw < 15
    assert not photodamage_check(IlluminationConfig(intensity_w_um2=90)).ok


def test_spectra_peak_at_own_shift_with_crosstalk():
    M = DEFAULT_SPECTRA.matrix()
    assert np.all(np.argmax(M, axis=0) == np.arange(3))
    off = M[~np.eye(3, dtype=bool)]
    assert off.min() >= 0.1 * M.max()
    assert np.linalg.cond(M) < 1e3


def test_spectrum_lookup_errors():
    with pytest.raises(UsageError):
        spectrum_value("rna", 2900)
    with pytest.raises(DomainError):
        spectrum_value("dna", 1000)
    assert spectrum_value("Lipid", 2850) == pytest.approx(1.45)
    assert set(CHEMICALS) == set(CHEMICAL_SHIFTS)

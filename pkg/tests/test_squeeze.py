import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from qsrs.errors import DomainError, FitError, UsageError
from qsrs.squeeze import (
    REFERENCE_MODEL, OpaModel, decompose_seed, deamplification_map, detected_variance,
    fit_opa, lg_radial_amplitude, mode_power_within, optimal_aperture, pumped_profile,
    seed_profile, sweep_aperture,
)


def radial_power(f, r_max=np.inf):
    return quad(lambda r: f(r) ** 2 * 2 * math.pi * r, 0, r_max, epsabs=1e-13, epsrel=1e-12)[0]


def overlap(f, g):
    return quad(lambda r: f(r) * g(r) * 2 * math.pi * r, 0, np.inf, epsabs=1e-13, epsrel=1e-12)[0]


def seed_field(r, w=1.0):
    return math.sqrt(2 / math.pi) / w * math.exp(-r * r / (w * w))


def quadrature_variance(model, eta, r_ap):
    """Independent route: every overlap and clipped power by numerical integration."""
    u0 = lambda r: lg_radial_amplitude(0, r, model.w0)
    u1 = lambda r: lg_radial_amplitude(1, r, model.w0)
    c00, c01 = overlap(seed_field, u0), overlap(seed_field, u1)
    lim = np.inf if r_ap is None else r_ap
    t0, t1 = radial_power(u0, lim), radial_power(u1, lim)
    v = model.a00 * c00**2 * t0 + model.a01 * c01**2 * t1 + 1 - c00**2 * t0 - c01**2 * t1
    return eta * v + 1 - eta


@pytest.mark.parametrize("p", [0, 1])
@pytest.mark.parametrize("w0", [0.5, 0.855, 1.7])
def test_modes_normalised(p, w0):
    assert radial_power(lambda r: lg_radial_amplitude(p, r, w0)) == pytest.approx(1.0, abs=1e-9)


def test_modes_orthogonal():
    u0 = lambda r: lg_radial_amplitude(0, r, 0.855)
    u1 = lambda r: lg_radial_amplitude(1, r, 0.855)
    assert abs(overlap(u0, u1)) < 1e-10


@pytest.mark.parametrize("w0", [0.6, 0.855, 1.0, 1.3])
def test_seed_overlaps_match_quadrature(w0):
    d = decompose_seed(w0)
    assert d.c00 == pytest.approx(overlap(seed_field, lambda r: lg_radial_amplitude(0, r, w0)), abs=1e-9)
    assert d.c01 == pytest.approx(overlap(seed_field, lambda r: lg_radial_amplitude(1, r, w0)), abs=1e-9)


def test_reference_decomposition_values():
    d = decompose_seed(0.855)
    assert d.c00 == pytest.approx(0.98785, abs=1e-5)
    assert d.c01 == pytest.approx(-0.15350, abs=1e-5)
    assert decompose_seed(1.0).c01 == 0.0


@pytest.mark.parametrize("p", [0, 1])
@pytest.mark.parametrize("r_ap", [0.2, 0.7, 1.1, 2.0])
def test_aperture_transmission_matches_quadrature(p, r_ap):
    w0 = 0.855
    expected = radial_power(lambda r: lg_radial_amplitude(p, r, w0), r_ap)
    assert mode_power_within(p, w0, r_ap) == pytest.approx(expected, abs=1e-9)


def test_transmission_limits():
    assert mode_power_within(0, 1.0, None) == 1.0
    assert mode_power_within(1, 1.0, np.inf) == 1.0
    assert mode_power_within(0, 1.0, 0.0) == 0.0
    with pytest.raises(DomainError):
        mode_power_within(2, 1.0, 1.0)


def test_seed_profile_unit_power():
    assert quad(lambda r: seed_profile(r) * 2 * math.pi * r, 0, np.inf)[0] == pytest.approx(1.0)


@pytest.mark.parametrize("r_ap", [None, 0.5, 1.2, 2.5])
def test_detected_variance_matches_quadrature(r_ap):
    assert detected_variance(REFERENCE_MODEL, 0.55, r_ap) == pytest.approx(
        quadrature_variance(REFERENCE_MODEL, 0.55, r_ap), abs=1e-6)


def test_no_aperture_reference_value():
    v = detected_variance(REFERENCE_MODEL, 0.55)
    assert v == pytest.approx(0.8112, abs=1e-4)


@settings(max_examples=50, deadline=None)
@given(w0=st.floats(0.3, 3.0), eta=st.floats(0.0, 1.0), r_ap=st.one_of(st.none(), st.floats(0.01, 5.0)))
def test_passive_loss_invariance(w0, eta, r_ap):
    assert detected_variance(OpaModel(w0, 1.0, 1.0), eta, r_ap) == pytest.approx(1.0, abs=1e-12)


def test_zero_efficiency_gives_shot_noise():
    assert detected_variance(REFERENCE_MODEL, 0.0) == 1.0
    with pytest.raises(DomainError):
        detected_variance(REFERENCE_MODEL, 1.5)


def test_sweep_optimum_beats_open_beam():
    curve = sweep_aperture(REFERENCE_MODEL, 0.55, np.linspace(0.05, 3.0, 296))
    r_opt = optimal_aperture(curve)
    assert 1.0 < r_opt < 1.4
    assert np.max(curve.squeezing_db) >= curve.no_aperture_db
    assert np.max(np.abs(np.diff(curve.variance))) < 0.01
    assert curve.variance[-1] == pytest.approx(curve.no_aperture_variance, abs=1e-3)


def test_sweep_validation():
    with pytest.raises(UsageError):
        sweep_aperture(REFERENCE_MODEL, 0.55, [])
    with pytest.raises(UsageError):
        sweep_aperture(REFERENCE_MODEL, 0.55, [1.0, 0.5])


def test_identity_model_gives_flat_curve():
    curve = sweep_aperture(OpaModel.identity(0.855), 0.55, np.linspace(0.1, 3, 30))
    assert np.allclose(curve.squeezing_db, 0.0, atol=1e-12)


def test_optimal_aperture_tie_prefers_larger_radius():
    curve = sweep_aperture(OpaModel.identity(), 0.5, [0.5, 1.0, 2.0])
    assert optimal_aperture(curve) == 2.0


def test_identity_profile_equals_seed():
    r = np.linspace(0, 3, 50)
    assert np.allclose(pumped_profile(OpaModel.identity(1.0), r, normalize=None), seed_profile(r))


def test_deamplification_map_on_axis():
    ratio = deamplification_map(REFERENCE_MODEL, np.array([0.0, 5.0, 40.0]))
    assert ratio[0] > 1.0
    assert np.isnan(ratio[2])


def test_fit_round_trip_noiseless():
    r = np.linspace(0, 2.5, 301)
    fit = fit_opa(r, pumped_profile(REFERENCE_MODEL, r, normalize="seed"))
    assert np.allclose(fit.model.as_tuple(), REFERENCE_MODEL.as_tuple(), rtol=1e-3)


def test_fit_peak_normalisation_needs_a00():
    r = np.linspace(0, 2.5, 301)
    y = pumped_profile(REFERENCE_MODEL, r, normalize="peak")
    with pytest.raises(UsageError):
        fit_opa(r, y, normalization="peak")
    fit = fit_opa(r, y, normalization="peak", a00=0.6)
    assert fit.model.a01 == pytest.approx(3.0, rel=1e-3)


def test_peak_profile_is_degenerate_in_overall_gain():
    r = np.linspace(0, 2.5, 50)
    a = pumped_profile(OpaModel(0.855, 0.6, 3.0), r)
    b = pumped_profile(OpaModel(0.855, 1.2, 6.0), r)
    assert np.allclose(a, b)


def test_fit_failure_carries_best_candidate():
    r = np.linspace(0, 2.5, 101)
    y = np.where(r < 1.0, 1.0, 0.0) + 0.5 * np.sin(9 * r) ** 2
    with pytest.raises(FitError) as info:
        fit_opa(r, y, rms_tol=1e-4)
    assert info.value.result is not None


def test_fit_input_validation():
    with pytest.raises(UsageError):
        fit_opa(np.linspace(0, 1, 5), np.ones(5))
    with pytest.raises(UsageError):
        fit_opa(np.linspace(0, 1, 30), -np.ones(30))

"""Pointer states, phase response, SNR bookkeeping and inversions."""

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import constants as const

from fluxsim.errors import Bifurcated, Unphysical
from fluxsim.readout import (
    CalibrationFit,
    ReadoutSettings,
    calibrate_photon_number,
    drive_for_photons,
    duffing_steady_state,
    efficiency_report,
    extract_chi_from_phase,
    geometric_factor,
    measurement_time_for_snr,
    phase_response,
    phase_separation,
    snr,
    steady_quadratures,
)


KAPPA = 1.16
F_R0 = 7.236184685827864


def default_settings(**overrides):
    base = dict(kappa_mhz=KAPPA, f_r0_ghz=F_R0, n_bar=114.0,
                tau_m_ns=480.0, n_noise=15.8)
    base.update(overrides)
    return ReadoutSettings(**base)


# -------------------------------------------------------------------------
# window arithmetic
# -------------------------------------------------------------------------

def test_measurement_photons_by_hand():
    s = default_settings()
    by_hand = 114.0 * (2.0 * math.pi * 1.16e-3) * 480.0 / 4.0
    assert s.measurement_photons() == pytest.approx(by_hand, rel=1e-12)
    assert s.measurement_photons() == pytest.approx(99.7065, abs=1e-3)
    assert s.measurement_photons(n_bar=57.0) == pytest.approx(by_hand / 2.0,
                                                              rel=1e-12)


def test_snr_by_hand():
    s = default_settings()
    chi = 1.73
    g = 2.0 * KAPPA * chi / (KAPPA**2 + chi**2)
    by_hand = math.sqrt(s.measurement_photons()) / math.sqrt(0.5 * 15.8) * g
    assert snr(s, chi) == pytest.approx(by_hand, rel=1e-12)
    assert geometric_factor(chi, KAPPA) == pytest.approx(g, rel=1e-12)
    # the geometric factor peaks at chi = kappa
    assert geometric_factor(KAPPA, KAPPA) == pytest.approx(1.0, rel=1e-12)


def test_noise_accounting():
    s = default_settings()
    assert 2.0 * s.sigma_m**2 == pytest.approx(15.8, rel=1e-12)
    assert s.eta == pytest.approx(1.0 / 15.8, rel=1e-12)


def test_efficiency_report_frozen_values():
    rep = efficiency_report(math.sqrt(15.8 / 2.0), F_R0)
    assert rep.eta == pytest.approx(0.06329113924050632, rel=1e-9)
    assert rep.n_noise == pytest.approx(15.8, rel=1e-12)
    assert rep.t_eff_kelvin == pytest.approx(5.48705705850718, rel=1e-9)
    by_hand = 15.8 * const.h * F_R0 * 1e9 / const.k
    assert rep.t_eff_kelvin == pytest.approx(by_hand, rel=1e-12)


# -------------------------------------------------------------------------
# pointer states
# -------------------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=0.05, max_value=5.0),
       st.floats(min_value=0.2, max_value=5.0),
       st.floats(min_value=0.1, max_value=10.0))
def test_reflection_is_lossless(chi, kappa, a_in):
    g_state, e_state = steady_quadratures(chi, kappa, a_in)
    for state in (g_state, e_state):
        assert state.I**2 + state.Q**2 == pytest.approx(a_in**2, rel=1e-9)
    # driving midway between the pulled resonances makes the signal
    # antisymmetric in Q with a common I
    assert g_state.I == pytest.approx(e_state.I, rel=1e-9)
    assert g_state.Q == pytest.approx(-e_state.Q, rel=1e-9)


def test_phase_response_resonance_and_winding():
    chi = 1.73
    grid = np.linspace(-30.0, 30.0, 24001)
    phase = phase_response(chi, KAPPA, grid, state="g")
    on_resonance = phase_response(chi, KAPPA, np.array([chi / 2.0]), state="g")
    assert abs(abs(on_resonance[0]) - math.pi) < 1e-9
    # full 2 pi winding across the resonance (direction is a convention)
    unwrapped = np.unwrap(phase)
    assert abs(unwrapped[0] - unwrapped[-1]) == pytest.approx(2.0 * math.pi,
                                                              abs=0.1)
    # far from resonance the reflection is unshifted
    assert abs(phase[0]) < 0.1
    mirrored = phase_response(chi, KAPPA, np.array([-chi / 2.0]), state="e")
    assert abs(abs(mirrored[0]) - math.pi) < 1e-9


def test_phase_separation_bounds():
    sep_small, _ = phase_separation(0.1, KAPPA)
    sep_large, _ = phase_separation(20.0, KAPPA)
    assert 0.0 < sep_small < sep_large <= math.pi + 1e-12
    assert sep_large == pytest.approx(math.pi, abs=0.2)


# -------------------------------------------------------------------------
# inversions
# -------------------------------------------------------------------------

def test_extract_chi_roundtrip_linear():
    # the separation-vs-chi map is monotone below chi of order kappa;
    # past that it saturates at pi and stops being invertible
    for chi in (0.2, 0.5, 1.0):
        sep, _ = phase_separation(chi, KAPPA)
        back = extract_chi_from_phase(sep, 114.0, KAPPA)
        assert back == pytest.approx(chi, rel=1e-3)


def test_extract_chi_roundtrip_with_kerr():
    kerr = 8.4e-5
    alpha_g, alpha_e = 1e-5, 4e-3
    chi = 0.9
    sep, _ = phase_separation(chi, KAPPA, kerr_intrinsic=kerr,
                              alpha_g=alpha_g, alpha_e=alpha_e, n_bar=74.0)
    back = extract_chi_from_phase(sep, 74.0, KAPPA, kerr_intrinsic=kerr,
                                  alpha_g=alpha_g, alpha_e=alpha_e)
    assert back == pytest.approx(chi, rel=1e-3)


def test_measurement_time_satisfies_definition():
    s = default_settings(n_bar=74.0, tau_m_ns=1.0)
    chi_of = lambda nb: 1.73
    tau = measurement_time_for_snr(3.0, s, chi_of)
    achieved = snr(dataclasses.replace(s, tau_m_ns=tau), 1.73)
    assert achieved == pytest.approx(3.0, abs=1e-9)
    grid = np.array([10.0, 74.0, 140.0])
    times = measurement_time_for_snr(3.0, s, chi_of, n_bar_grid=grid)
    assert times.shape == (3,)
    # more photons per window means less time for the same SNR
    assert times[0] > times[1] > times[2]


# -------------------------------------------------------------------------
# Kerr steady state
# -------------------------------------------------------------------------

def test_duffing_solves_its_cubic():
    kerr, detuning, n_in = 8.4e-5, 0.3, 40.0
    n = duffing_steady_state(kerr, KAPPA, detuning, n_in)
    residual = n * ((KAPPA / 2.0)**2 + (detuning - kerr * n)**2) - KAPPA * n_in
    assert abs(residual) < 1e-9


def test_duffing_linear_limit_is_lorentzian():
    detuning, n_in = 0.4, 25.0
    n = duffing_steady_state(0.0, KAPPA, detuning, n_in)
    lorentzian = KAPPA * n_in / ((KAPPA / 2.0)**2 + detuning**2)
    assert n == pytest.approx(lorentzian, rel=1e-12)
    assert duffing_steady_state(0.0, KAPPA, detuning, 0.0) == 0.0


def test_duffing_bistable_branch_selection():
    # strong Kerr and a detuning several linewidths out on the pulled
    # side fold the response; this drive lands inside the fold
    kerr, detuning = 0.4, 3.0
    n_in = 5.0
    with pytest.raises(Bifurcated):
        duffing_steady_state(kerr, KAPPA, detuning, n_in)
    low = duffing_steady_state(kerr, KAPPA, detuning, n_in, branch="low")
    residual = low * ((KAPPA / 2.0)**2 + (detuning - kerr * low)**2) - KAPPA * n_in
    assert abs(residual) < 1e-9


def test_drive_for_photons_at_peak():
    assert drive_for_photons(114.0, KAPPA) == pytest.approx(
        114.0 * KAPPA / 4.0, rel=1e-12)
    # at the self-consistent peak the Kerr does not enter
    assert drive_for_photons(114.0, KAPPA, kerr=8.4e-5) == pytest.approx(
        114.0 * KAPPA / 4.0, rel=1e-12)


# -------------------------------------------------------------------------
# photon-number calibration
# -------------------------------------------------------------------------

def test_calibration_recovers_exact_slope():
    chi0 = -1.73
    slope = 37.5
    powers = np.linspace(0.2, 3.0, 8)
    points = [(p, chi0 * slope * p) for p in powers]
    fit = calibrate_photon_number(points, chi0)
    assert isinstance(fit, CalibrationFit)
    assert fit.photons_per_power == pytest.approx(slope, rel=1e-12)
    assert fit.rms_residual < 1e-9
    assert fit.n_points == 8


def test_calibration_bias_with_shrinking_chi():
    """A per-photon shift that shrinks with n biases the linear fit low.

    The measured qubit pull at n photons is the sum of the first n
    dispersive shifts; when |chi| decreases along the ladder that sum
    grows sublinearly, so shifts divided by the zero-photon chi
    understate the photon number.
    """
    chi0 = -1.0
    slope = 30.0
    chi_of = lambda n: chi0 / (1.0 + 0.01 * n)
    powers = np.linspace(0.5, 4.0, 8)
    points = []
    for p in powers:
        n_true = slope * p
        full = int(n_true)
        shift = sum(chi_of(k) for k in range(full))
        shift += (n_true - full) * chi_of(full)
        points.append((p, shift))
    fit = calibrate_photon_number(points, chi0)
    assert fit.photons_per_power < slope


# -------------------------------------------------------------------------
# domain guards
# -------------------------------------------------------------------------

def test_unphysical_inputs_rejected():
    with pytest.raises(Unphysical):
        default_settings(tau_m_ns=0.0)
    with pytest.raises(Unphysical):
        default_settings(kappa_mhz=-1.0)
    with pytest.raises(Unphysical):
        default_settings(n_bar=-5.0)
    with pytest.raises(Unphysical):
        default_settings(n_noise=0.5)
    with pytest.raises(Unphysical):
        efficiency_report(0.0, F_R0)
    with pytest.raises(Unphysical):
        measurement_time_for_snr(-1.0, default_settings(), lambda nb: 1.0)

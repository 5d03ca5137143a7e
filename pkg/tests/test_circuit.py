"""Circuit reduction, junction collapse and Hamiltonian construction."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import eig_banded, expm

from fluxsim.circuit import (
    CircuitParams,
    FluxBias,
    HilbertTruncation,
    build_coupled_hamiltonian,
    build_fluxonium_hamiltonian,
    diagonalize_and_label,
    displacement_elements,
    effective_josephson,
)
from fluxsim.errors import TruncationTooLarge

from conftest import SPOT1_PHI_EXT


SMALL_TRUNC = HilbertTruncation(n_res=20, n_atom=5, basis="normal")
SMALL_BARE = HilbertTruncation(n_res=20, n_atom=5, basis="bare")


# -------------------------------------------------------------------------
# derived element values
# -------------------------------------------------------------------------

def test_resonator_frequency():
    p = CircuitParams()
    direct = 1e3 / (2.0 * math.pi * math.sqrt(p.L_r * p.C_r))
    assert p.f_r0 == pytest.approx(direct, rel=1e-12)
    assert p.f_r0 == pytest.approx(7.236184685827864, rel=1e-9)


def test_inductance_determinant():
    p = CircuitParams()
    direct = p.L * p.L_r + p.L * p.L_s + p.L_r * p.L_s
    assert p.loop_inductance_D == pytest.approx(direct, rel=1e-12)
    assert p.loop_inductance_D == pytest.approx(5341.995, abs=1e-9)


def test_effective_inductances():
    p = CircuitParams()
    d = p.loop_inductance_D
    assert d / (p.L + p.L_s) == pytest.approx(23.068596968519238, rel=1e-12)
    assert d / (p.L_r + p.L_s) == pytest.approx(231.5559167750325, rel=1e-12)


def test_coupling_strength_bare_basis():
    p = CircuitParams()
    model = build_coupled_hamiltonian(p, FluxBias.from_external(SPOT1_PHI_EXT),
                                      SMALL_BARE)
    assert model.coupling_g == pytest.approx(-0.020799787251425953, rel=1e-9)
    # in the normal-mode basis the linear coupling has been rotated away
    normal = build_coupled_hamiltonian(p, FluxBias.from_external(SPOT1_PHI_EXT),
                                       SMALL_TRUNC)
    assert normal.coupling_g == 0.0


def test_node_frequencies_from_effective_inductances():
    p = CircuitParams()
    model = build_coupled_hamiltonian(p, FluxBias(), SMALL_BARE)
    l_res = p.loop_inductance_D / (p.L + p.L_s)
    l_atom = p.loop_inductance_D / (p.L_r + p.L_s)
    f_res = 1e3 / (2.0 * math.pi * math.sqrt(l_res * p.C_r))
    f_atom = 1e3 / (2.0 * math.pi * math.sqrt(l_atom * p.C))
    assert model.f_nodes[0] == pytest.approx(f_res, rel=1e-12)
    assert model.f_nodes[1] == pytest.approx(f_atom, rel=1e-12)


# -------------------------------------------------------------------------
# SQUID collapse
# -------------------------------------------------------------------------

def test_junction_endpoints_exact():
    p = CircuitParams()
    at_zero = effective_josephson(p, FluxBias(phi_s=0.0))
    assert abs(at_zero.amplitude - 24.0) < 1e-12
    assert at_zero.sign == 1
    assert at_zero.phase_offset == 0.0
    frustrated = effective_josephson(p, FluxBias(phi_s=0.5))
    assert abs(frustrated.amplitude - 0.71) < 1e-12


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=-3.0, max_value=3.0,
                 allow_nan=False, allow_infinity=False))
def test_junction_amplitude_bounds_and_period(phi_s):
    p = CircuitParams()
    j = effective_josephson(p, FluxBias(phi_s=phi_s))
    assert 0.71 - 1e-9 <= j.amplitude <= 24.0 + 1e-9
    shifted = effective_josephson(p, FluxBias(phi_s=phi_s + 2.0))
    assert shifted.amplitude == pytest.approx(j.amplitude, abs=1e-9)
    mirrored = effective_josephson(p, FluxBias(phi_s=-phi_s))
    assert mirrored.amplitude == pytest.approx(j.amplitude, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=-40.0, max_value=40.0,
                 allow_nan=False, allow_infinity=False),
       st.floats(min_value=10.0, max_value=200.0,
                 allow_nan=False, allow_infinity=False))
def test_single_coil_bias_roundtrip(phi_ext, area_ratio):
    bias = FluxBias.from_external(phi_ext, area_ratio)
    assert bias.phi_ext == pytest.approx(phi_ext, abs=1e-12)


def test_dial_values_and_reduced_bias_agree():
    p = CircuitParams()
    dial = FluxBias(phi_s=0.3, phi_l=5.37)
    folded = dial.reduced()
    h_dial = build_fluxonium_hamiltonian(p, dial, 40)
    h_folded = build_fluxonium_hamiltonian(p, folded, 40)
    assert np.allclose(h_dial, h_folded, atol=1e-9)
    e_dial = np.linalg.eigvalsh(build_coupled_hamiltonian(p, dial, SMALL_TRUNC).hamiltonian)
    e_folded = np.linalg.eigvalsh(build_coupled_hamiltonian(p, folded, SMALL_TRUNC).hamiltonian)
    assert np.allclose(e_dial, e_folded, atol=1e-8)


# -------------------------------------------------------------------------
# operator construction
# -------------------------------------------------------------------------

def test_displacement_matches_matrix_exponential():
    # the closed form gives exact infinite-space elements, so the expm
    # reference must be computed in a much larger space before cropping
    n, big, lam = 18, 70, 0.9
    ladder = np.diag(np.sqrt(np.arange(1, big)), 1)
    x = ladder + ladder.T
    reference = expm(1j * lam * x)[:n, :n]
    direct = displacement_elements(n, lam)
    assert np.max(np.abs(direct - reference)) < 1e-10


def test_displacement_large_truncation_finite():
    d = displacement_elements(300, 2.0)
    assert np.all(np.isfinite(d.real))
    assert np.all(np.isfinite(d.imag))
    # rows far enough from the truncation edge keep their full weight
    prod = d @ d.conj().T
    assert np.allclose(np.diag(prod)[:150], 1.0, atol=1e-8)


def test_fluxonium_levels_match_phase_grid():
    """Fock-ladder diagonalization against a finite-difference phase grid.

    The grid route discretizes -4 E_C d^2/dphi^2 + E_L phi^2 / 2
    - A cos(phi - alpha) with a five-point stencil on a wide interval and
    solves the banded problem; the frozen values below were produced by
    that independent discretization.
    """
    p = CircuitParams()
    cases = [
        (FluxBias.from_external(SPOT1_PHI_EXT), 0.910051930, 7.652965249),
        (FluxBias(phi_s=0.3, phi_l=0.37), 0.717556680, 12.997476799),
    ]
    for flux, f_ge, f_ef in cases:
        h = build_fluxonium_hamiltonian(p, flux, 220)
        e = np.linalg.eigvalsh(h)
        assert e[1] - e[0] == pytest.approx(f_ge, abs=1e-6)
        assert e[2] - e[1] == pytest.approx(f_ef, abs=1e-6)


def test_phase_grid_recomputed_in_place():
    """Same check with the grid rebuilt here rather than frozen."""
    p = CircuitParams()
    flux = FluxBias(phi_s=0.12, phi_l=0.44)
    junction = effective_josephson(p, flux)
    alpha = 2.0 * math.pi * flux.phi_ext + junction.phase_offset

    pts, span = 4001, 24.0
    phi = np.linspace(-span, span, pts)
    step = phi[1] - phi[0]
    v = 0.5 * p.E_L * phi**2 - junction.signed_amplitude * np.cos(phi - alpha)
    c0, c1, c2 = 30.0 / 12.0, -16.0 / 12.0, 1.0 / 12.0
    bands = np.zeros((3, pts))
    bands[0] = 4.0 * p.E_C * c0 / step**2 + v
    bands[1, :] = 4.0 * p.E_C * c1 / step**2
    bands[2, :] = 4.0 * p.E_C * c2 / step**2
    grid = eig_banded(bands, lower=True, eigvals_only=True,
                      select="i", select_range=(0, 2))

    e = np.linalg.eigvalsh(build_fluxonium_hamiltonian(p, flux, 220))
    assert e[1] - e[0] == pytest.approx(grid[1] - grid[0], abs=1e-6)
    assert e[2] - e[1] == pytest.approx(grid[2] - grid[1], abs=1e-6)


# -------------------------------------------------------------------------
# coupled model
# -------------------------------------------------------------------------

def test_coupled_hamiltonian_symmetric():
    p = CircuitParams()
    for trunc in (SMALL_TRUNC, SMALL_BARE):
        h = build_coupled_hamiltonian(p, FluxBias.from_external(SPOT1_PHI_EXT),
                                      trunc).hamiltonian
        assert np.allclose(h, h.T, atol=1e-12)


def test_decoupling_limit():
    p = CircuitParams(L_s=1e-8)
    model = build_coupled_hamiltonian(p, FluxBias.from_external(SPOT1_PHI_EXT),
                                      SMALL_BARE)
    assert abs(model.coupling_g) < 1e-6
    f_res = 1e3 / (2.0 * math.pi * math.sqrt(p.L_r * p.C_r))
    f_atom = 1e3 / (2.0 * math.pi * math.sqrt(p.L * p.C))
    assert model.f_nodes[0] == pytest.approx(f_res, rel=1e-6)
    assert model.f_nodes[1] == pytest.approx(f_atom, rel=1e-6)


def test_label_assignment_complete_and_unique(params, spot2_flux):
    model = build_coupled_hamiltonian(params, spot2_flux, SMALL_TRUNC)
    spectrum = diagonalize_and_label(model)
    seen = set()
    for n in range(10):
        for a in range(3):
            assert (n, a) in spectrum.labels
            idx = spectrum.labels[(n, a)]
            assert idx not in seen
            seen.add(idx)
    # the default retention keeps the lower half of the spectrum
    assert spectrum.energies.shape == (SMALL_TRUNC.dim // 2,)


def test_truncation_guards():
    with pytest.raises(TruncationTooLarge):
        HilbertTruncation(n_res=1000, n_atom=1000)
    with pytest.raises(ValueError):
        HilbertTruncation(n_res=1, n_atom=5)
    with pytest.raises(ValueError):
        HilbertTruncation(n_res=20, n_atom=5, basis="dressed")

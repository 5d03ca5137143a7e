"""Observables derived from labeled spectra.

Everything here is a pure function of one or more :class:`DressedSpectrum`
values: transition frequencies along a flux sweep, the photon-number
dependent dispersive shift chi_ge(n) and its cumulative AC-Stark form, the
nonlinearity the atom imprints on the photon ladder, and matrix elements of
the node operators.  Flux sweeps are the only place any real compute
happens; those drivers live here too so labeling continuity between
neighboring points stays in one spot.

Sign conventions follow the ladder definition: chi_ge(n) is the e-minus-g
difference of photon addition energies, so a resonator that runs faster
when the atom is excited gives positive chi.
"""

import math
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import minimize_scalar

from .circuit import (
    DEFAULT_AREA_RATIO,
    FluxBias,
    HilbertTruncation,
    build_coupled_hamiltonian,
    diagonalize_and_label,
)
from .errors import MissingLabel, NonPositiveKerr, TruncationEdge, Unphysical

#: flux window (in Phi_0) that brackets both transition-frequency minima
#: for the default circuit
DEFAULT_WINDOW = (29.0, 31.0)

#: photon rungs this close to the resonator truncation are treated as edge
#: artifacts: the ladder there is bent by the missing levels above, and
#: differences across it are not converged
EDGE_MARGIN = 2

#: eigenpair retention for sweep points that only feed transition curves
SWEEP_RETENTION = 64

_REQUIRED_SWEEP_LABELS = ((0, "g"), (0, "e"), (0, "f"))


@dataclass(frozen=True)
class TransitionCurve:
    """Ground-referenced transition frequencies along a flux sweep.

    ``flux`` is the external flux grid in Phi_0, ``f_ge`` and ``f_gf`` are
    in GHz.  ``flagged`` marks points where a required label was ambiguous
    (level crossing); in lenient mode those rows hold NaN.
    """

    flux: np.ndarray
    f_ge: np.ndarray
    f_gf: np.ndarray
    flagged: np.ndarray

    def minima_indices(self):
        """Indices of strict interior minima of f_ge, flagged points excluded."""
        f = np.where(self.flagged, np.inf, self.f_ge)
        inner = (f[1:-1] < f[:-2]) & (f[1:-1] < f[2:])
        return np.flatnonzero(inner) + 1


@dataclass(frozen=True)
class DispersiveCurve:
    """chi_ge versus photon number at a fixed flux bias.

    ``chi_mhz`` is signed; ``flagged`` marks entries whose underlying labels
    were ambiguous.  Defined at most up to n_res - 2.
    """

    flux: FluxBias
    photon_index: np.ndarray
    chi_mhz: np.ndarray
    flagged: np.ndarray


@dataclass(frozen=True)
class KerrReport:
    """Nonlinearity summary at one flux point and photon index."""

    self_kerr_k11_khz: float
    n_max: float
    alpha_g_hz: float
    alpha_e_hz: float
    photon_index: int


@dataclass(frozen=True)
class SweetSpot:
    """A local minimum of f_ge: where it sits and what chi does there."""

    phi_ext: float
    f_ge_ghz: float
    chi0_mhz: float


#: default intrinsic self-Kerr of the resonator, kHz per photon, chosen so
#: the default linewidth kappa/2pi = 1.16 MHz bifurcates at 8e3 photons
DEFAULT_SELF_KERR_KHZ = 1.16e3 / (math.sqrt(3.0) * 8.0e3)


def _edge_guard(spectrum, n_top):
    if n_top >= spectrum.n_res - EDGE_MARGIN:
        raise TruncationEdge(
            f"photon index {n_top} is within {EDGE_MARGIN} rungs of the "
            f"resonator truncation ({spectrum.n_res} levels)")


def transition_frequencies(spectrum_sweep, strict=True):
    """Extract f_ge and f_gf from a sweep of labeled spectra.

    :param spectrum_sweep: iterable of :class:`DressedSpectrum`
    :param strict: if true (default), raise :class:`MissingLabel` when any
        of (0,g), (0,e), (0,f) is absent or ambiguous at some point.  If
        false, such points get NaN and a ``flagged`` mark instead; a label
        that is ambiguous but present still contributes its value.
    :return: :class:`TransitionCurve`
    """
    flux, f_ge, f_gf, flagged = [], [], [], []
    for spec in spectrum_sweep:
        bad = None
        for lab in _REQUIRED_SWEEP_LABELS:
            if not spec.has(*lab):
                bad = f"label {lab} absent"
                break
            if spec.is_ambiguous(*lab):
                bad = f"label {lab} ambiguous"
                break
        if bad is not None and strict:
            raise MissingLabel(f"{bad} at phi_ext={spec.flux.phi_ext:.6f}")
        flux.append(spec.flux.phi_ext)
        if bad is not None and "absent" in bad:
            f_ge.append(np.nan)
            f_gf.append(np.nan)
        else:
            f_ge.append(spec.transition((0, "g"), (0, "e")))
            f_gf.append(spec.transition((0, "g"), (0, "f")))
        flagged.append(bad is not None)
    return TransitionCurve(flux=np.asarray(flux), f_ge=np.asarray(f_ge),
                           f_gf=np.asarray(f_gf),
                           flagged=np.asarray(flagged, bool))


def dispersive_shift(spectrum, n):
    """Signed chi_ge(n) in MHz.

    The e-minus-g difference of the n -> n+1 photon addition energies.
    Raises :class:`TruncationEdge` when n + 1 reaches the rungs bent by the
    resonator truncation, :class:`MissingLabel` when a needed dressed label
    was not retained.
    """
    _edge_guard(spectrum, n + 1)
    up_e = spectrum.transition((n, "e"), (n + 1, "e"))
    up_g = spectrum.transition((n, "g"), (n + 1, "g"))
    return 1e3 * (up_e - up_g)


def dispersive_curve(spectrum, n_max=None):
    """chi_ge(n) for n = 0 .. n_max at one flux point.

    With ``n_max=None`` the ladder is walked as far as retained labels and
    the truncation-edge rule allow; an explicit n_max raises if any point
    in the range is unavailable.
    """
    top = spectrum.n_res - EDGE_MARGIN - 2
    auto = n_max is None
    if not auto and n_max > top:
        raise TruncationEdge(
            f"n_max={n_max} exceeds the usable ladder (max {top} for "
            f"{spectrum.n_res} photon levels)")
    stop = top if auto else n_max
    ns, chis, flags = [], [], []
    for n in range(stop + 1):
        need = ((n, "g"), (n, "e"), (n + 1, "g"), (n + 1, "e"))
        if not all(spectrum.has(*lab) for lab in need):
            if auto:
                break
            raise MissingLabel(f"labels for chi_ge({n}) not retained")
        ns.append(n)
        chis.append(dispersive_shift(spectrum, n))
        flags.append(any(spectrum.is_ambiguous(*lab) for lab in need))
    return DispersiveCurve(flux=spectrum.flux,
                           photon_index=np.asarray(ns, int),
                           chi_mhz=np.asarray(chis),
                           flagged=np.asarray(flags, bool))


def inherited_nonlinearity(spectrum, state, n):
    """Photon-ladder anharmonicity alpha_state(n) in Hz, for state g or e.

    Second difference of the dressed ladder at fixed atom state.  Zero for
    a decoupled harmonic resonator; the coupled values for the excited
    state are orders of magnitude larger than for the ground state.
    """
    if n < 1:
        raise ValueError("nonlinearity needs n >= 1 (three ladder rungs)")
    _edge_guard(spectrum, n + 1)
    e_lo = spectrum.energy(n - 1, state)
    e_mid = spectrum.energy(n, state)
    e_hi = spectrum.energy(n + 1, state)
    return 1e9 * (e_hi - 2.0 * e_mid + e_lo)


def nonlinearity_curve(spectrum, n_max=None):
    """(n, alpha_g, alpha_e) arrays over the usable ladder, alphas in Hz."""
    top = spectrum.n_res - EDGE_MARGIN - 2
    auto = n_max is None
    stop = top if auto else min(n_max, top)
    ns, a_g, a_e = [], [], []
    for n in range(1, stop + 1):
        need = [(m, s) for m in (n - 1, n, n + 1) for s in ("g", "e")]
        if not all(spectrum.has(*lab) for lab in need):
            if auto:
                break
            raise MissingLabel(f"labels for alpha({n}) not retained")
        ns.append(n)
        a_g.append(inherited_nonlinearity(spectrum, "g", n))
        a_e.append(inherited_nonlinearity(spectrum, "e", n))
    return np.asarray(ns, int), np.asarray(a_g), np.asarray(a_e)


def ac_stark_shift(spectrum, n):
    """Qubit-frequency pull at photon occupation n, in MHz.

    Difference of the ge splitting at n photons and at zero photons;
    telescopes the dispersive shifts chi_ge(0..n-1).
    """
    shifted = spectrum.transition((n, "g"), (n, "e"))
    bare = spectrum.transition((0, "g"), (0, "e"))
    return 1e3 * (shifted - bare)


def operator_matrix_element(model, spectrum, operator, from_label, to_label):
    """|<to| O |from>| for a node operator, in zero-point units.

    ``operator`` is one of ``res_charge``, ``atom_flux``, ``atom_charge``;
    the spectrum must have been diagonalized from ``model`` with vectors
    retained.  Labels are (n, state) pairs.
    """
    ket = spectrum.vector(*from_label)
    bra = spectrum.vector(*to_label)
    return abs(float(bra @ model.apply_node_operator(operator, ket)))


def matrix_element_row(model, spectrum, from_label, to_label):
    """The (|q_r|, |phi_a|, |q_a|) triple between two dressed states."""
    return tuple(
        operator_matrix_element(model, spectrum, op, from_label, to_label)
        for op in ("res_charge", "atom_flux", "atom_charge"))


def bifurcation_photon_number(k11, kappa):
    """Photon number where a Kerr resonator of linewidth kappa bifurcates.

    kappa / (sqrt(3) K11); both arguments in the same frequency units.
    """
    if k11 <= 0.0:
        raise NonPositiveKerr(
            f"self-Kerr must be positive for the bifurcation formula, got {k11}")
    if kappa <= 0.0:
        raise Unphysical(f"linewidth must be positive, got {kappa}")
    return kappa / (math.sqrt(3.0) * k11)


def kerr_report(spectrum, n, kappa_mhz, k11_khz=DEFAULT_SELF_KERR_KHZ):
    """Bundle intrinsic and inherited nonlinearity at one photon index."""
    return KerrReport(
        self_kerr_k11_khz=k11_khz,
        n_max=bifurcation_photon_number(k11_khz * 1e3, kappa_mhz * 1e6),
        alpha_g_hz=inherited_nonlinearity(spectrum, "g", n),
        alpha_e_hz=inherited_nonlinearity(spectrum, "e", n),
        photon_index=n)


def transition_sweep(params, fluxes, trunc=None, *,
                     area_ratio=DEFAULT_AREA_RATIO, retain=None,
                     want_vectors=False, workers=1):
    """Diagonalize and label the coupled model at each external flux.

    Points are processed in order inside each worker's contiguous block so
    ambiguous labels can consult the neighboring point for continuity.
    Returns the list of :class:`DressedSpectrum` in grid order.
    """
    if trunc is None:
        trunc = HilbertTruncation.default_normal()
    fluxes = np.asarray(fluxes, float)

    def run_block(idx):
        out, prev = [], None
        for i in idx:
            bias = FluxBias.from_external(fluxes[i], area_ratio)
            model = build_coupled_hamiltonian(params, bias, trunc)
            prev = diagonalize_and_label(model, retain=retain,
                                         want_vectors=want_vectors,
                                         previous=prev)
            out.append(prev)
        return out

    blocks = np.array_split(np.arange(fluxes.size), max(1, workers or 1))
    if len(blocks) == 1:
        chunks = [run_block(blocks[0])]
    else:
        chunks = Parallel(n_jobs=len(blocks))(
            delayed(run_block)(b) for b in blocks)
    return [spec for chunk in chunks for spec in chunk]


def find_sweet_spots(params, *, window=DEFAULT_WINDOW, steps=100, trunc=None,
                     area_ratio=DEFAULT_AREA_RATIO, curve=None, xtol=1e-7,
                     workers=1):
    """Locate the f_ge minima inside a flux window.

    A coarse sweep brackets each strict interior minimum, golden-section
    search polishes the flux value, and chi_ge(0) is evaluated at the
    polished point.  Pass a precomputed ``curve`` (with its flux grid) to
    skip the coarse sweep.  Returns :class:`SweetSpot` list in flux order.
    """
    if trunc is None:
        trunc = HilbertTruncation.default_normal()
    if curve is None:
        grid = np.linspace(window[0], window[1], steps)
        sweep = transition_sweep(params, grid, trunc, area_ratio=area_ratio,
                                 retain=SWEEP_RETENTION, workers=workers)
        curve = transition_frequencies(sweep, strict=False)

    def f_ge_at(phi):
        bias = FluxBias.from_external(phi, area_ratio)
        model = build_coupled_hamiltonian(params, bias, trunc)
        spec = diagonalize_and_label(model, retain=32)
        return spec.transition((0, "g"), (0, "e"))

    spots = []
    for i in curve.minima_indices():
        res = minimize_scalar(
            f_ge_at, method="golden",
            bracket=(curve.flux[i - 1], curve.flux[i], curve.flux[i + 1]),
            options={"xtol": xtol})
        phi = float(res.x)
        bias = FluxBias.from_external(phi, area_ratio)
        model = build_coupled_hamiltonian(params, bias, trunc)
        spec = diagonalize_and_label(model, retain=SWEEP_RETENTION)
        spots.append(SweetSpot(
            phi_ext=phi,
            f_ge_ghz=float(spec.transition((0, "g"), (0, "e"))),
            chi0_mhz=dispersive_shift(spec, 0)))
    return spots

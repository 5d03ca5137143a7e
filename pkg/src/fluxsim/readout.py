"""Input-output model of the driven readout resonator.

Steady-state reflection off a single-port lossless resonator whose
frequency depends on the atom state (dispersive shift) and on its own
photon number (Kerr).  Everything is stationary: pointer states, SNR and
measurement-time curves, Duffing branch photon numbers, phase-response
curves and their inversion back to chi, photon-number calibration, and the
noise-photon bookkeeping that turns a measured pointer spread into an
efficiency and an effective temperature.

Rate conventions: resonator linewidth and detunings are quoted as
frequencies in MHz (kappa here means kappa/2pi).  Photon-flux balance
equations are homogeneous in the rate unit, so they use MHz throughout;
the one place the angular rate matters, the measurement photon number
n_m = n_bar * kappa * tau_m / 4, carries its own 2pi explicitly.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import constants as const
from scipy.optimize import brentq

from .errors import (
    AboveBifurcation,
    Bifurcated,
    InsufficientData,
    NoBracket,
    Unphysical,
)

#: default resonator linewidth kappa/2pi in MHz
DEFAULT_KAPPA_MHZ = 1.16

#: pointer-state spread at the quantum limit, sqrt photon units:
#: 1/4 photon vacuum noise per quadrature plus 1/4 from a quantum-limited
#: phase-preserving amplifier
SIGMA0 = math.sqrt(0.5)


@dataclass(frozen=True)
class ReadoutSettings:
    """Drive and detection parameters for one readout configuration.

    ``kappa_mhz`` is kappa/2pi.  ``n_noise`` counts noise photons referred
    to the resonator output; the quantum limit is 1 and the efficiency is
    its inverse.
    """

    kappa_mhz: float
    f_r0_ghz: float
    n_bar: float
    tau_m_ns: float
    n_noise: float
    drive_detuning_mhz: float = 0.0

    def __post_init__(self):
        if self.kappa_mhz <= 0.0:
            raise Unphysical(f"kappa must be positive, got {self.kappa_mhz}")
        if self.n_bar < 0.0:
            raise Unphysical(f"n_bar must be nonnegative, got {self.n_bar}")
        if self.tau_m_ns <= 0.0:
            raise Unphysical(f"tau_m must be positive, got {self.tau_m_ns}")
        if self.n_noise < 1.0:
            raise Unphysical(
                f"n_noise < 1 means efficiency above unity, got {self.n_noise}")

    @property
    def eta(self):
        return 1.0 / self.n_noise

    @property
    def sigma_m(self):
        """Pointer spread implied by the noise photon number."""
        return math.sqrt(0.5 * self.n_noise)

    @property
    def kappa_rad_per_ns(self):
        return 2.0 * math.pi * self.kappa_mhz * 1e-3

    def measurement_photons(self, n_bar=None, tau_m_ns=None):
        """n_m = n_bar kappa tau_m / 4 with kappa the angular rate."""
        nb = self.n_bar if n_bar is None else n_bar
        tm = self.tau_m_ns if tau_m_ns is None else tau_m_ns
        return nb * self.kappa_rad_per_ns * tm / 4.0


@dataclass(frozen=True)
class PointerState:
    """One circular-Gaussian pointer blob in the IQ plane."""

    I: float
    Q: float
    sigma: float


@dataclass(frozen=True)
class EfficiencyReport:
    eta: float
    n_noise: float
    t_eff_kelvin: float


@dataclass(frozen=True)
class CalibrationFit:
    """Linear drive-power to photon-number map, constrained through origin."""

    photons_per_power: float
    n_points: int
    rms_residual: float

    def photons(self, power):
        return self.photons_per_power * np.asarray(power, float)


def geometric_factor(chi, kappa):
    """2 kappa chi / (kappa^2 + chi^2): the Q-separation per drive photon."""
    return 2.0 * kappa * chi / (kappa**2 + chi**2)


def steady_quadratures(chi, kappa, a_in, sigma=SIGMA0):
    """Steady-state pointer states for atom in g and in e.

    Drive sits midway between the two pulled resonances, so the common-mode
    quadrature I is state-independent and all the signal lives in Q.
    Returns the (g, e) pair; lossless reflection keeps I^2 + Q^2 = a_in^2.
    """
    common = (kappa**2 - chi**2) / (kappa**2 + chi**2) * a_in
    signal = geometric_factor(chi, kappa) * a_in
    return (PointerState(I=common, Q=signal, sigma=sigma),
            PointerState(I=common, Q=-signal, sigma=sigma))


def snr(settings, chi_mhz):
    """Separation-over-spread SNR for one measurement window.

    sqrt(n_m)/sigma_m times the geometric factor; chi in MHz.
    """
    n_m = settings.measurement_photons()
    return (math.sqrt(n_m) / settings.sigma_m
            * abs(geometric_factor(chi_mhz, settings.kappa_mhz)))


def measurement_time_for_snr(target_snr, settings, chi_of_nbar,
                             n_bar_grid=None):
    """Invert the SNR formula for the measurement time.

    ``chi_of_nbar`` maps a mean photon number to the model chi there (MHz),
    so the returned times account for the shrinking of chi with drive
    power.  With ``n_bar_grid`` given, returns an array of times over the
    grid; otherwise a single time at ``settings.n_bar``.

    tau_m = target^2 sigma_m^2 (kappa^2 + chi^2)^2 / (n_bar kappa kappa^2 chi^2)
    with the leading kappa angular, in ns.
    """
    if target_snr <= 0.0:
        raise Unphysical(f"target SNR must be positive, got {target_snr}")
    scalar = n_bar_grid is None
    grid = np.atleast_1d(np.asarray(
        settings.n_bar if scalar else n_bar_grid, float))
    out = np.empty_like(grid)
    for k, nb in enumerate(grid):
        if nb <= 0.0:
            raise Unphysical("n_bar must be positive to invert the SNR")
        g = geometric_factor(chi_of_nbar(nb), settings.kappa_mhz)
        out[k] = (target_snr**2 * (0.5 * settings.n_noise)
                  / (nb * settings.kappa_rad_per_ns / 4.0) / g**2)
    return float(out[0]) if scalar else out


def duffing_steady_state(kerr, kappa, detuning, n_in, branch=None):
    """Photon number of a driven Kerr resonator in steady state.

    Solves n [(kappa/2)^2 + (detuning - kerr*n)^2] = kappa * n_in.  All
    rates in MHz; ``n_in`` is the incident photon flux in photon*MHz.
    ``branch=None`` demands a unique solution and raises
    :class:`Bifurcated` in the bistable regime; ``branch="low"`` selects
    the low-amplitude stable branch there.  Exceeding the fold photon
    number kappa/(sqrt(3)|kerr|) raises :class:`AboveBifurcation`.
    """
    if kappa <= 0.0 or n_in < 0.0:
        raise Unphysical("kappa must be positive and drive nonnegative")
    if n_in == 0.0:
        return 0.0
    if kerr == 0.0:
        return kappa * n_in / ((0.5 * kappa)**2 + detuning**2)

    roots = np.roots([kerr**2, -2.0 * kerr * detuning,
                      (0.5 * kappa)**2 + detuning**2, -kappa * n_in])
    real = roots[np.abs(roots.imag) < 1e-9 * max(1.0, np.abs(roots).max())].real
    positive = np.sort(real[real > 0.0])
    if positive.size == 0:
        raise Unphysical("cubic returned no positive photon number")
    if positive.size > 1 and branch is None:
        raise Bifurcated(
            f"bistable at detuning {detuning} MHz: photon branches "
            f"{positive.min():.3g} and {positive.max():.3g}")
    n = float(positive[0])
    n_fold = kappa / (math.sqrt(3.0) * abs(kerr))
    if n > n_fold * (1.0 + 1e-9):
        raise AboveBifurcation(
            f"photon number {n:.3g} above the fold at {n_fold:.3g}")
    return n


def drive_for_photons(n_bar, kappa, kerr=0.0, detuning_at_peak=True):
    """Incident flux that sustains n_bar photons at the pulled resonance.

    At the self-consistent peak the effective detuning vanishes, so
    n_in = n_bar * kappa / 4 independent of the Kerr; with
    ``detuning_at_peak=False`` the caller is on bare resonance and the
    Kerr term reenters.
    """
    if detuning_at_peak or kerr == 0.0:
        return n_bar * kappa / 4.0
    return n_bar * ((0.5 * kappa)**2 + (kerr * n_bar)**2) / kappa


def phase_response(chi, kappa, f_grid, state="g", kerr_intrinsic=0.0,
                   alpha_state=0.0, n_in=0.0):
    """Reflection phase versus drive frequency for one atom state.

    ``f_grid`` holds drive detunings from the bare resonator in MHz.  The
    resonance sits at +chi/2 for g and -chi/2 for e, further pulled by the
    total Kerr (intrinsic plus the inherited alpha of that state) times
    the self-consistent photon number from the Duffing cubic.  Returns the
    principal-value phase in (-pi, pi]; on bare resonance with chi = 0 and
    no Kerr this is pi exactly.
    """
    sign = {"g": +1.0, "e": -1.0}[state]
    k_tot = kerr_intrinsic + alpha_state
    f_grid = np.atleast_1d(np.asarray(f_grid, float))
    delta = np.empty_like(f_grid)
    for j, f in enumerate(f_grid):
        det = f - sign * 0.5 * chi
        n = duffing_steady_state(k_tot, kappa, det, n_in, branch="low") \
            if (k_tot != 0.0 and n_in > 0.0) else \
            (kappa * n_in / ((0.5 * kappa)**2 + det**2) if n_in > 0.0 else 0.0)
        delta[j] = det - k_tot * n
    z = (delta - 0.5j * kappa) / (delta + 0.5j * kappa)
    # adding +0.0 turns a negative-zero imaginary part into +0.0 so the
    # on-resonance point lands on +pi, not -pi
    return np.angle(z.real + 1j * (z.imag + 0.0))


def phase_separation(chi, kappa, f_grid=None, kerr_intrinsic=0.0,
                     alpha_g=0.0, alpha_e=0.0, n_bar=0.0):
    """Maximal g/e phase separation over drive frequency.

    Returns (separation in (0, pi], drive detuning where it occurs).  The
    drive flux is whatever holds ``n_bar`` photons at a pulled peak.
    """
    if f_grid is None:
        span = 5.0 * kappa + abs(chi)
        f_grid = np.linspace(-span, span, 4001)
    n_in = drive_for_photons(n_bar, kappa) if n_bar > 0.0 else 0.0
    ph_g = phase_response(chi, kappa, f_grid, "g", kerr_intrinsic,
                          alpha_g, n_in)
    ph_e = phase_response(chi, kappa, f_grid, "e", kerr_intrinsic,
                          alpha_e, n_in)
    diff = np.angle(np.exp(1j * (ph_g - ph_e)))
    j = int(np.argmax(np.abs(diff)))
    return float(np.abs(diff[j])), float(np.atleast_1d(f_grid)[j])


def extract_chi_from_phase(separation_rad, n_bar, kappa, kerr_intrinsic=0.0,
                           alpha_g=0.0, alpha_e=0.0, chi_max=None,
                           f_grid=None):
    """Invert the phase-response model for chi, in MHz.

    Root-finds the chi whose forward-model maximal phase separation equals
    the measured one.  The map is monotone up to chi of order kappa where
    the separation saturates at pi; a separation the model cannot reach on
    the search interval raises :class:`NoBracket`.
    """
    if not 0.0 < separation_rad <= math.pi:
        raise Unphysical(
            f"phase separation must be in (0, pi], got {separation_rad}")
    hi = kappa if chi_max is None else chi_max
    lo = 1e-6 * hi

    def sep_at(chi):
        return phase_separation(chi, kappa, f_grid, kerr_intrinsic,
                                alpha_g, alpha_e, n_bar)[0]

    top = sep_at(hi)
    if separation_rad > top + 1e-12:
        raise NoBracket(
            f"separation {separation_rad:.6f} rad exceeds the model maximum "
            f"{top:.6f} rad at chi = {hi} MHz")
    if separation_rad >= top:
        return hi
    bottom = sep_at(lo)
    if separation_rad <= bottom:
        raise NoBracket(
            f"separation {separation_rad:.6f} rad below the model floor "
            f"{bottom:.6f} rad at chi = {lo:.3g} MHz")
    return float(brentq(lambda c: sep_at(c) - separation_rad, lo, hi,
                        xtol=1e-9 * hi))


def calibrate_photon_number(stark_points, chi_per_photon_mhz):
    """Fit the linear drive-power to photon-number map.

    ``stark_points`` holds (power, measured qubit shift in MHz) pairs from
    the weak-drive regime; each shift divided by the per-photon shift
    gives a photon number, and the slope is the least-squares line through
    the origin.  Returns a :class:`CalibrationFit` whose ``photons``
    method extrapolates to any power.
    """
    pts = list(stark_points)
    if len(pts) < 2:
        raise InsufficientData(
            f"need at least 2 calibration points, got {len(pts)}")
    if chi_per_photon_mhz == 0.0:
        raise Unphysical("per-photon shift must be nonzero")
    power = np.array([p for p, _ in pts], float)
    n_est = np.array([s for _, s in pts], float) / chi_per_photon_mhz
    denom = float(power @ power)
    if denom == 0.0:
        raise InsufficientData("all calibration powers are zero")
    slope = float(power @ n_est) / denom
    rms = float(np.sqrt(np.mean((n_est - slope * power)**2)))
    return CalibrationFit(photons_per_power=slope, n_points=len(pts),
                          rms_residual=rms)


def efficiency_report(sigma_m, f_r0_ghz):
    """Noise bookkeeping from a measured pointer spread.

    eta = sigma_0^2 / sigma_m^2 with sigma_0^2 = 1/2; the noise photon
    number is 2 sigma_m^2 and the effective temperature is the one a
    thermal occupation of that many photons at f_r0 would have.
    """
    if sigma_m <= 0.0:
        raise Unphysical(f"sigma_m must be positive, got {sigma_m}")
    var = sigma_m**2
    n_noise = 2.0 * var
    t_eff = n_noise * const.h * f_r0_ghz * 1e9 / const.k
    return EfficiencyReport(eta=0.5 / var, n_noise=n_noise,
                            t_eff_kelvin=t_eff)

"""Measurement-based feedback state preparation and its error budget.

One shot of the protocol: (for target e, a population-inverting pi pulse)
-> decision readout window -> instrument latency -> conditional pi pulse
iff the decision disagrees with the target -> verification readout window.
The atom follows the two-state jump model during every stage, with an
absorbing third state for leakage shots; each window produces one
integrated Q value read against the pointer centers, and the reported
fidelity is the fraction of shots whose verification window is assigned
the target state.

Geometry is normalized: the g and e pointer centers sit at +1 and -1, the
window noise spread is 1/SNR, and the leakage cloud sits outside the g-e
segment (its dispersive shift is unrelated to the g-e one; the
measurement resolves it from both, so leaked shots are never counted as
the target).  Assignment picks the nearest center.

The budget arithmetic leans on the midpoint threshold: a transition fails
the shot if it happens in the late half of the decision window, anywhere
in the latency, or the early half of the verification window, which adds
up to exactly one window plus the latency of exposure.  A misread can
spoil either window (a misread decision triggers a pulse that creates a
genuinely wrong state), so the overlap budget entry is 1 - (1 - p)^2
with p the pairwise misassignment probability.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit
from scipy.special import erfc

from .errors import FitDiverged, InsufficientData, Unphysical

#: pointer centers (g, e) in normalized window units
Q_G, Q_E = 1.0, -1.0

#: default leakage-cloud center, two full g-e separations beyond g, so its
#: decision boundary sits twice as far from the g center as the g-e midpoint
#: and noise spillover into it stays negligible at any usable SNR
Q_F = Q_G + 2.0 * (Q_G - Q_E)

#: default instrument delay between the decision window and the pulse
DEFAULT_LATENCY_NS = 428.0


@dataclass(frozen=True)
class ProtocolConfig:
    """Inputs of one feedback state-preparation configuration.

    ``snr`` is the integrated signal-to-noise of a single window of
    ``tau_m_ns`` (separation over twice the spread); the caller composes
    it from the readout model at the operating point.  Rates are in 1/us;
    ``f_leakage`` is the per-shot probability of landing in the absorbing
    third state, and ``f_center`` its pointer position.
    """

    target: str
    tau_m_ns: float
    snr: float
    gamma_up: float
    gamma_down: float
    latency_ns: float = DEFAULT_LATENCY_NS
    pi_pulse_duration_ns: float = 48.0
    pi_pulse_error: float = 0.0
    n_bar: float = 0.0
    initial_p_e: float = 0.0
    f_leakage: float = 0.0
    f_center: float = Q_F

    def __post_init__(self):
        if self.target not in ("g", "e"):
            raise Unphysical(f"target must be 'g' or 'e', got {self.target!r}")
        if self.tau_m_ns <= 0.0 or self.latency_ns <= 0.0:
            raise Unphysical("window and latency must be positive")
        if self.pi_pulse_duration_ns < 0.0:
            raise Unphysical("pulse duration cannot be negative")
        if self.snr <= 0.0:
            raise Unphysical("window SNR must be positive")
        if self.gamma_up < 0.0 or self.gamma_down < 0.0:
            raise Unphysical("rates must be nonnegative")
        for name in ("pi_pulse_error", "initial_p_e", "f_leakage"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise Unphysical(f"{name} must be a probability, got {p}")

    @property
    def sigma_window(self):
        return 0.5 * abs(Q_G - Q_E) / self.snr


@dataclass(frozen=True)
class ErrorBudget:
    """Independent per-source error estimates; not an additive total."""

    transitions: float
    f_leakage: float
    overlap: float


@dataclass(frozen=True)
class StatePrepReport:
    """Outcome of a state-preparation run plus its predicted budget."""

    target: str
    shots: int
    seed: int
    fidelity: float
    fidelity_err: float
    error_transitions: float
    error_f_leakage: float
    error_overlap: float
    q_first: np.ndarray = field(repr=False)
    q_final: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class MixtureFit:
    """Shared-width Gaussian mixture fit of a 1-D histogram."""

    centers: tuple
    sigma: float
    amplitudes: tuple
    weights: tuple
    overlap_error: float
    residual_fraction: float


def _evolve(state, duration_us, rate_up, rate_down, rng):
    """Exact jump evolution; returns (final state, per-state occupation)."""
    occ = [0.0, 0.0, 0.0]
    remaining = duration_us
    while True:
        rate = (rate_up, rate_down, 0.0)[state]
        if rate <= 0.0:
            occ[state] += remaining
            return state, occ
        dwell = rng.exponential(1.0 / rate)
        if dwell >= remaining:
            occ[state] += remaining
            return state, occ
        occ[state] += dwell
        remaining -= dwell
        state ^= 1


def _pi_flip(state, error, rng):
    """Instantaneous stochastic bit flip; the third state is untouched."""
    if state == 2:
        return state
    if error > 0.0 and rng.random() < error:
        return state
    return state ^ 1


def _assign(y, f_center):
    """Nearest pointer center: 0 = g, 1 = e, 2 = leakage cloud."""
    d = (abs(y - Q_G), abs(y - Q_E), abs(y - f_center))
    return d.index(min(d))


def error_budget(config):
    """Per-source error predictions for a protocol configuration.

    Transitions use the relevant rate (up for target g, down for target e)
    over one window plus the latency.  The leakage entry is the injected
    population.  The overlap entry counts a misread of either window.
    """
    gamma = config.gamma_up if config.target == "g" else config.gamma_down
    exposure_us = (config.tau_m_ns + config.latency_ns) * 1e-3
    p_pair = 0.5 * erfc(config.snr / math.sqrt(2.0))
    return ErrorBudget(
        transitions=1.0 - math.exp(-gamma * exposure_us),
        f_leakage=config.f_leakage,
        overlap=1.0 - (1.0 - p_pair) ** 2)


def run_state_prep(config, shots, seed=0):
    """Simulate the protocol shot by shot.

    Each shot gets its own derived seed, so the result is deterministic
    for (config, shots, seed) and independent of evaluation order.
    Returns a :class:`StatePrepReport` whose error fields hold the budget
    predictions of :func:`error_budget`, not measured quantities.
    """
    if shots < 1:
        raise Unphysical("need at least one shot")
    target = 0 if config.target == "g" else 1
    tau_us = config.tau_m_ns * 1e-3
    lat_us = config.latency_ns * 1e-3
    pulse_us = config.pi_pulse_duration_ns * 1e-3
    up, down = config.gamma_up, config.gamma_down
    sigma_w = config.sigma_window
    centers = np.array([Q_G, Q_E, config.f_center])

    q_first = np.empty(shots)
    q_final = np.empty(shots)
    hits = 0
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(shots)):
        rng = np.random.default_rng(child)
        state = 1 if rng.random() < config.initial_p_e else 0
        if target == 1:
            state = _pi_flip(state, config.pi_pulse_error, rng)
            if pulse_us > 0.0:
                state, _ = _evolve(state, pulse_us, up, down, rng)
        if config.f_leakage > 0.0 and rng.random() < config.f_leakage:
            state = 2

        state, occ = _evolve(state, tau_us, up, down, rng)
        y1 = float(np.dot(occ, centers)) / tau_us
        if sigma_w > 0.0:
            y1 += rng.normal(0.0, sigma_w)
        q_first[i] = y1
        decision = _assign(y1, config.f_center)

        state, _ = _evolve(state, lat_us, up, down, rng)
        if decision != target:
            state = _pi_flip(state, config.pi_pulse_error, rng)
            if pulse_us > 0.0:
                state, _ = _evolve(state, pulse_us, up, down, rng)

        state, occ = _evolve(state, tau_us, up, down, rng)
        y2 = float(np.dot(occ, centers)) / tau_us
        if sigma_w > 0.0:
            y2 += rng.normal(0.0, sigma_w)
        q_final[i] = y2
        if _assign(y2, config.f_center) == target:
            hits += 1

    fid = hits / shots
    budget = error_budget(config)
    return StatePrepReport(
        target=config.target, shots=shots, seed=seed, fidelity=fid,
        fidelity_err=math.sqrt(max(fid * (1.0 - fid), 1e-12) / shots),
        error_transitions=budget.transitions,
        error_f_leakage=budget.f_leakage,
        error_overlap=budget.overlap,
        q_first=q_first, q_final=q_final)


def _mixture(x, *params):
    """Shared-sigma sum of Gaussians: params = (s, a1, mu1, a2, mu2, ...)."""
    s = params[0]
    out = np.zeros_like(x)
    for k in range(1, len(params), 2):
        out = out + params[k] * np.exp(-0.5 * ((x - params[k + 1]) / s) ** 2)
    return out


def _quantile_init(x, counts, n_components):
    """Split the histogram mass into equal chunks and seed one component
    per chunk from its local mean and peak."""
    total = counts.sum()
    cum = np.cumsum(counts) / total
    inits = [np.sqrt(np.average((x - np.average(x, weights=counts)) ** 2,
                                weights=counts)) / n_components]
    for k in range(n_components):
        lo, hi = k / n_components, (k + 1) / n_components
        mask = (cum >= lo) & (cum <= hi)
        if not mask.any():
            mask = np.ones_like(counts, bool)
        mu = np.average(x[mask], weights=np.maximum(counts[mask], 1e-12))
        inits += [counts[mask].max(), mu]
    return inits


def gaussian_overlap_error(bin_centers, counts, n_components=2,
                           centers_hint=None):
    """Fit a shared-width Gaussian mixture and report the overlap error.

    The overlap error is the midpoint-threshold misassignment probability
    of the two heaviest components, (1/2) erfc(d / (2 sqrt(2) sigma)) for
    separation d.  The residual spread is quoted as a fraction of the
    total counts.  When ``centers_hint`` is given it seeds the first fit
    attempt, which keeps a small far-out component from being absorbed by
    a dominant peak.  Raises :class:`FitDiverged` with the
    initializations tried when no start converges.
    """
    x = np.asarray(bin_centers, float)
    counts = np.asarray(counts, float)
    if x.size < 2 * n_components + 1:
        raise InsufficientData("histogram has fewer bins than parameters")
    total = counts.sum()
    if total <= 0.0:
        raise InsufficientData("histogram is empty")

    base = _quantile_init(x, counts, n_components)
    spread = x.max() - x.min()
    starts = []
    if centers_hint is not None:
        hinted = [base[0]]
        for mu in centers_hint:
            amp = counts[np.argmin(np.abs(x - mu))]
            hinted += [max(amp, 1e-3 * counts.max()), mu]
        starts.append(hinted)
    starts += [base,
               [base[0] * 2.0] + base[1:],
               [spread / (4.0 * n_components)] + base[1:]]
    attempts = []
    for p0 in starts:
        try:
            popt, _ = curve_fit(_mixture, x, counts, p0=p0, maxfev=20_000)
        except RuntimeError as err:
            attempts.append(f"p0={np.round(p0, 4).tolist()}: {err}")
            continue
        s = abs(popt[0])
        amps = popt[1::2]
        mus = popt[2::2]
        if s == 0.0 or np.any(amps < 0.0):
            attempts.append(
                f"p0={np.round(p0, 4).tolist()}: degenerate solution")
            continue
        order = np.argsort(amps)[::-1]
        d = abs(mus[order[0]] - mus[order[1]])
        overlap = 0.5 * erfc(d / (2.0 * math.sqrt(2.0) * s))
        resid = counts - _mixture(x, *popt)
        weights = amps / amps.sum()
        return MixtureFit(centers=tuple(mus), sigma=s,
                          amplitudes=tuple(amps), weights=tuple(weights),
                          overlap_error=float(overlap),
                          residual_fraction=float(resid.std() / total))
    raise FitDiverged("gaussian mixture fit did not converge",
                      attempts=attempts)


def three_component_population(bin_centers, counts,
                               centers_hint=(Q_G, Q_E, Q_F)):
    """(p_g, p_e, p_f) from a three-component fit of the final histogram.

    Components are matched to the hint centers by proximity; weights are
    normalized to sum to one exactly.
    """
    fit = gaussian_overlap_error(bin_centers, counts, n_components=3,
                                 centers_hint=centers_hint)
    remaining = list(range(3))
    pops = [0.0, 0.0, 0.0]
    for slot, hint in enumerate(centers_hint):
        best = min(remaining, key=lambda k: abs(fit.centers[k] - hint))
        remaining.remove(best)
        pops[slot] = fit.weights[best]
    return tuple(pops)

"""Quantum-jump trace synthesis and analysis.

The effective description of the monitored atom is a two-state Markov
chain (rates gamma_up for g to e, gamma_down for e to g) whose state sets
the center of the measured Q quadrature; detection adds circular Gaussian
noise per sample.  The synthesis side draws exact exponential holding
times so the generator itself can serve as the oracle for the analysis
side: a two-point latching filter, dwell-time statistics with censoring,
occupancy and QND bookkeeping, and a filter-free cross-check that
averages trajectories triggered near the excited-state center.

Rates are quoted in 1/us and sample periods in ns throughout.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import constants as const
from scipy.optimize import curve_fit

from .errors import (
    DegenerateFilter,
    FitDiverged,
    InsufficientData,
    InsufficientDwells,
    InsufficientTriggers,
    Unphysical,
)

#: latching window half-width, units of the pooled sigma
DEFAULT_THRESHOLD_SIGMA = 2.5

#: trigger half-width around the e center for the filter-free decay check
TRIGGER_HALFWIDTH_SIGMA = 0.1

#: dwell histogram resolution
BINS_PER_DECADE = 20


@dataclass(frozen=True)
class JumpModel:
    """Two-state rate model plus pointer geometry for trace synthesis.

    ``gamma_up`` takes g to e and ``gamma_down`` e to g, both in 1/us.
    ``q_g`` and ``q_e`` are the Q-quadrature centers and ``sigma`` the
    per-sample noise spread, all in sqrt photon units.
    """

    gamma_up: float
    gamma_down: float
    q_g: float
    q_e: float
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.gamma_up < 0.0 or self.gamma_down < 0.0:
            raise Unphysical("transition rates must be nonnegative")
        if self.q_g == self.q_e:
            raise Unphysical("pointer centers must be distinct")
        if self.sigma < 0.0:
            raise Unphysical("noise spread must be nonnegative")


@dataclass(frozen=True)
class IQTrace:
    """A sampled IQ record with enough metadata to analyze it.

    ``samples`` has shape (N, 2) holding (I, Q) pairs; ``meta`` carries at
    least sigma and the pointer centers for synthetic traces.
    """

    dt_ns: float
    samples: np.ndarray
    meta: dict

    def __post_init__(self):
        if self.dt_ns <= 0.0:
            raise Unphysical("sample period must be positive")
        if len(self.samples) == 0:
            raise Unphysical("trace must contain samples")

    @property
    def duration_ns(self):
        return self.dt_ns * len(self.samples)

    @property
    def q(self):
        return self.samples[:, 1]


@dataclass(frozen=True)
class DwellHistogram:
    """Log-binned dwell-time counts for one state, times in us."""

    state: str
    bin_edges_us: np.ndarray
    counts: np.ndarray


@dataclass(frozen=True)
class RateEstimate:
    """Transition rates and occupancy recovered from a state sequence."""

    gamma_up: float
    gamma_up_err: float
    gamma_down: float
    gamma_down_err: float
    p_e: float
    qnd_fidelity: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.p_e <= 1.0:
            raise Unphysical(f"p_e out of range: {self.p_e}")
        if self.qnd_fidelity is not None \
                and not 0.0 <= self.qnd_fidelity <= 1.0:
            raise Unphysical(f"qnd fidelity out of range: {self.qnd_fidelity}")


def _switch_times(rng, duration_ns, rate_up_ns, rate_down_ns, initial):
    """Absolute times of state changes of the exact Markov chain."""
    times = []
    t = 0.0
    state = initial
    while True:
        rate = rate_up_ns if state == 0 else rate_down_ns
        if rate <= 0.0:
            break
        t += rng.exponential(1.0 / rate)
        if t >= duration_ns:
            break
        times.append(t)
        state ^= 1
    return np.asarray(times)


def simulate_jump_trace(model, duration_ns, dt_ns, initial_state=0):
    """Synthesize an IQ trace from the two-state jump model.

    Holding times are exact exponentials; the state is piecewise constant
    and read out instantaneously at each sample time.  The I channel
    carries no signal.  Deterministic for a given model seed.
    """
    if dt_ns <= 0.0 or duration_ns < dt_ns:
        raise Unphysical("need duration >= dt > 0")
    max_rate_ns = max(model.gamma_up, model.gamma_down) * 1e-3
    if max_rate_ns * dt_ns > 0.05:
        warnings.warn(
            f"dt = {dt_ns} ns is not small against the fastest dwell "
            f"({1.0 / max_rate_ns:.0f} ns); dwell statistics will be biased",
            stacklevel=2)
    ss = np.random.SeedSequence(model.seed)
    seed_jumps, seed_noise = ss.spawn(2)

    n = int(duration_ns // dt_ns)
    switches = _switch_times(np.random.default_rng(seed_jumps), duration_ns,
                             model.gamma_up * 1e-3, model.gamma_down * 1e-3,
                             initial_state)
    sample_t = np.arange(n) * dt_ns
    flips = np.searchsorted(switches, sample_t, side="right")
    states = (initial_state + flips) % 2

    samples = np.random.default_rng(seed_noise).normal(
        0.0, model.sigma, size=(n, 2))
    samples[:, 1] += np.where(states == 1, model.q_e, model.q_g)
    meta = {"sigma": model.sigma, "q_g": model.q_g, "q_e": model.q_e,
            "seed": model.seed, "gamma_up": model.gamma_up,
            "gamma_down": model.gamma_down, "initial_state": initial_state}
    return IQTrace(dt_ns=dt_ns, samples=samples, meta=meta)


def rotate_to_q(trace):
    """Rotate the IQ plane so the two-blob axis lies along Q.

    The axis is the principal eigenvector of the sample covariance, which
    for a mixture of two identical circular Gaussians is exactly the line
    joining the centers.  Returns (rotated trace, angle of that axis).
    """
    xy = trace.samples
    c = np.cov(xy[:, 0], xy[:, 1])
    half_tr = 0.5 * (c[0, 0] + c[1, 1])
    disc = math.hypot(0.5 * (c[0, 0] - c[1, 1]), c[0, 1])
    lead = half_tr + disc
    if c[0, 1] == 0.0:
        v = np.array([0.0, 1.0]) if c[1, 1] >= c[0, 0] else np.array([1.0, 0.0])
    else:
        v = np.array([c[0, 1], lead - c[0, 0]])
        v /= math.hypot(*v)
    if v[1] < 0.0:
        v = -v
    w = np.array([v[1], -v[0]])
    rotated = np.column_stack((xy @ w, xy @ v))
    meta = dict(trace.meta)
    meta["rotation_rad"] = math.atan2(v[1], v[0])
    return IQTrace(dt_ns=trace.dt_ns, samples=rotated, meta=meta), \
        meta["rotation_rad"]


def latching_filter(trace, centers, sigma,
                    threshold_sigma=DEFAULT_THRESHOLD_SIGMA):
    """Two-point latched state assignment of a Q-aligned trace.

    The label switches only on confident evidence for the opposite state:
    two consecutive samples inside the other state's window of half-width
    ``threshold_sigma * sigma``.  A sample outside both windows, or inside
    both, never moves the latch; neither does a lone in-window outlier,
    which keeps the false-switch probability at the square of the single
    -sample tail weight.  The initial state is the nearer center.  Returns
    an int8 array (0 = g, 1 = e).
    """
    q_g, q_e = centers
    if q_g == q_e:
        raise Unphysical("centers must be distinct")
    thr = threshold_sigma * sigma
    if abs(q_g - q_e) < 2.0 * thr:
        warnings.warn(DegenerateFilter(
            f"latching windows overlap: separation {abs(q_g - q_e):.3g} < "
            f"2 x {thr:.3g}; overlapping samples will not switch the latch"),
            stacklevel=2)
    q = trace.q
    in_g = np.abs(q - q_g) < thr
    in_e = np.abs(q - q_e) < thr
    only_g = in_g & ~in_e
    only_e = in_e & ~in_g
    event = np.full(q.size, -1, np.int8)
    event[1:][only_g[1:] & only_g[:-1]] = 0
    event[1:][only_e[1:] & only_e[:-1]] = 1
    idx = np.where(event >= 0, np.arange(q.size), -1)
    last = np.maximum.accumulate(idx)
    initial = 0 if abs(q[0] - q_g) <= abs(q[0] - q_e) else 1
    states = np.where(last >= 0, event[np.maximum(last, 0)], initial)
    return states.astype(np.int8)


def _runs(states):
    """(state, start, length) triples for each maximal constant run."""
    edges = np.flatnonzero(np.diff(states)) + 1
    starts = np.concatenate(([0], edges))
    ends = np.concatenate((edges, [states.size]))
    return [(int(states[s]), int(s), int(e - s)) for s, e in zip(starts, ends)]


def _log_edges(values_us):
    lo = math.floor(math.log10(values_us.min()) * BINS_PER_DECADE)
    hi = math.ceil(math.log10(values_us.max()) * BINS_PER_DECADE)
    return 10.0 ** (np.arange(lo, hi + 1) / BINS_PER_DECADE)


def dwell_statistics(states, dt_ns, min_dwells=30, qnd_window_samples=None):
    """Rates, occupancy and dwell histograms from a state sequence.

    Only complete dwells count toward the means: the first and last runs
    are censored (their true extent is unknown) and excluded.  The rate is
    the inverse maximum-likelihood mean with standard error Gamma/sqrt(N).
    Occupancy uses the full sequence.  Returns
    ({"g": :class:`DwellHistogram`, "e": ...}, :class:`RateEstimate`).
    """
    states = np.asarray(states)
    runs = _runs(states)[1:-1]
    dwells = {0: [], 1: []}
    for state, _, length in runs:
        dwells[state].append(length * dt_ns * 1e-3)
    for state, lab in ((0, "g"), (1, "e")):
        if len(dwells[state]) < min_dwells:
            raise InsufficientDwells(
                f"{len(dwells[state])} complete {lab} dwells, "
                f"need {min_dwells}")
    est = {}
    for state in (0, 1):
        d = np.asarray(dwells[state])
        gamma = 1.0 / d.mean()
        est[state] = (gamma, gamma / math.sqrt(d.size))
    p_e = float(np.mean(states == 1))
    qnd = None
    if qnd_window_samples is not None:
        qnd = qnd_fidelity(window_majority(states, qnd_window_samples))
    hists = {}
    for state, lab in ((0, "g"), (1, "e")):
        d = np.asarray(dwells[state])
        edges = _log_edges(d)
        counts, _ = np.histogram(d, bins=edges)
        hists[lab] = DwellHistogram(state=lab, bin_edges_us=edges,
                                    counts=counts)
    return hists, RateEstimate(
        gamma_up=est[0][0], gamma_up_err=est[0][1],
        gamma_down=est[1][0], gamma_down_err=est[1][1],
        p_e=p_e, qnd_fidelity=qnd)


def window_assignments(trace, window_samples, centers):
    """Assign one state per adjacent integration window of the trace.

    Each window of ``window_samples`` points is averaged in Q and
    thresholded at the midpoint of the centers: the outcome of one
    measurement of duration window * dt.
    """
    if window_samples < 1:
        raise Unphysical("window must contain at least one sample")
    q_g, q_e = centers
    q = trace.q
    n_win = q.size // window_samples
    if n_win == 0:
        raise InsufficientData("trace shorter than one window")
    means = q[:n_win * window_samples].reshape(n_win, window_samples).mean(1)
    mid = 0.5 * (q_g + q_e)
    return ((means - mid) * (q_e - q_g) > 0.0).astype(np.int8)


def window_majority(states, window_samples):
    """Per-window state by majority vote, for pre-filtered sequences."""
    n_win = states.size // window_samples
    if n_win == 0:
        raise InsufficientData("sequence shorter than one window")
    chunk = states[:n_win * window_samples].reshape(n_win, window_samples)
    return (chunk.mean(1) > 0.5).astype(np.int8)


def qnd_fidelity(assignments, min_pairs=100):
    """Q = (P_g|g + P_e|e)/2 over adjacent measurement pairs.

    ``assignments`` is the per-window outcome sequence; each consecutive
    pair contributes to the conditional repeat probability of its first
    member's state.
    """
    a = np.asarray(assignments)
    if a.size - 1 < min_pairs:
        raise InsufficientData(
            f"{a.size - 1} window pairs, need {min_pairs}")
    first, second = a[:-1], a[1:]
    probs = []
    for state in (0, 1):
        mask = first == state
        if not mask.any():
            # a state never observed cannot break QNDness; count it perfect
            probs.append(1.0)
            continue
        probs.append(float(np.mean(second[mask] == state)))
    return 0.5 * (probs[0] + probs[1])


def thermal_population(f_ge_ghz, t_mk):
    """Two-level Boltzmann excited-state population."""
    if f_ge_ghz <= 0.0 or t_mk <= 0.0:
        raise Unphysical("need positive frequency and temperature")
    x = const.h * f_ge_ghz * 1e9 / (const.k * t_mk * 1e-3)
    return 1.0 / (1.0 + math.exp(x))


def effective_temperature(p_e, f_ge_ghz):
    """Temperature (mK) whose thermal population equals p_e.

    Inverse of :func:`thermal_population`; populations at or above 1/2
    have no positive-temperature description.
    """
    if not 0.0 < p_e < 0.5:
        raise Unphysical(
            f"p_e = {p_e} outside (0, 0.5): no thermal temperature")
    x = math.log(1.0 / p_e - 1.0)
    return const.h * f_ge_ghz * 1e9 / (const.k * x) * 1e3


def free_decay_rate(trace, centers, sigma, n_lags=None, min_triggers=25,
                    max_triggers=50_000):
    """Total rate from trigger-averaged decay, without the latching filter.

    Every sample within ``TRIGGER_HALFWIDTH_SIGMA`` of the e center starts
    a segment; the averaged segments relax from the e center toward the
    steady-state mixture and an exponential fit of that relaxation gives
    gamma_up + gamma_down.  Returns (rate, fit error) in 1/us.
    """
    q_g, q_e = centers
    q = trace.q
    if n_lags is None:
        n_lags = min(5000, q.size // 10)
    triggers = np.flatnonzero(
        np.abs(q - q_e) < TRIGGER_HALFWIDTH_SIGMA * sigma)
    triggers = triggers[triggers < q.size - n_lags]
    if triggers.size < min_triggers:
        raise InsufficientTriggers(
            f"{triggers.size} triggers near the e center, need {min_triggers}")
    if triggers.size > max_triggers:
        stride = triggers.size // max_triggers + 1
        triggers = triggers[::stride]
    acc = np.zeros(n_lags)
    for t in triggers:
        acc += q[t:t + n_lags]
    pop = (acc / triggers.size - q_g) / (q_e - q_g)

    t_us = np.arange(n_lags) * trace.dt_ns * 1e-3
    tail = float(pop[-max(1, n_lags // 10):].mean())
    amp0 = float(pop[0] - tail)
    drop = np.flatnonzero(pop - tail < amp0 / math.e)
    tau_guess = t_us[drop[0]] if drop.size else t_us[-1] / 3.0
    attempts = []
    for g0 in (1.0 / max(tau_guess, 1e-9), 3.0 / max(tau_guess, 1e-9)):
        p0 = (tail, amp0, g0)
        try:
            popt, pcov = curve_fit(
                lambda t, c, a, g: c + a * np.exp(-g * t),
                t_us, pop, p0=p0, maxfev=10_000)
            if popt[2] > 0.0 and np.isfinite(pcov[2, 2]):
                return float(popt[2]), float(math.sqrt(pcov[2, 2]))
            attempts.append(f"p0={p0}: nonpositive or unbounded rate")
        except RuntimeError as err:
            attempts.append(f"p0={p0}: {err}")
    raise FitDiverged("exponential fit of the averaged decay failed",
                      attempts=attempts)

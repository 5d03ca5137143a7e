"""Command-line entry point: one tool, one config file, CSV out.

Subcommands map onto the library layers: ``spectrum`` and ``chi`` drive
the circuit model over flux, ``snr-time`` and ``calibrate`` the readout
model, ``jumps`` the trace synthesis/analysis pair, ``state-prep`` the
feedback protocol, and ``fit-spectrum`` adjusts circuit parameters to a
measured transition curve.  Exit codes: 0 success, 2 config/usage error,
3 numerical failure, 4 insufficient data.
"""

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from . import __version__
from .circuit import FluxBias, build_coupled_hamiltonian, diagonalize_and_label
from .config import config_hash, default_config, load_config, save_config
from .csvio import column, read_csv, write_csv
from .errors import (ConfigError, FitDiverged, InsufficientData,
                     NumericalError, Unphysical)
from .feedback import ProtocolConfig, run_state_prep
from .jumps import (IQTrace, JumpModel, dwell_statistics, effective_temperature,
                    free_decay_rate, latching_filter, rotate_to_q,
                    simulate_jump_trace, thermal_population)
from .readout import (calibrate_photon_number, measurement_time_for_snr, snr)
from .spectro import (ac_stark_shift, dispersive_curve, dispersive_shift,
                      find_sweet_spots, transition_frequencies,
                      transition_sweep)

#: pointer centers used by the synthetic jump traces, in sqrt photon units
TRACE_Q_G, TRACE_Q_E = 1.0, -1.0

#: fixed histogram range/binning for the state-prep outputs
HIST_RANGE, HIST_BINS = (-4.0, 8.0), 120


def _setup(args):
    cfg = load_config(args.config) if args.config else default_config()
    if args.out:
        cfg = replace(cfg, output_dir=args.out)
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    meta = {"version": __version__,
            "config_sha256": config_hash(cfg),
            "seed": seed}
    workers = args.workers if args.workers else (os.cpu_count() or 1)
    return cfg, outdir, seed, meta, workers


def _emit(path, meta, columns, rows):
    write_csv(path, meta, columns, rows)
    print(f"wrote {path}")


def _spectrum_at(cfg, phi):
    flux = FluxBias.from_external(phi, cfg.area_ratio)
    model = build_coupled_hamiltonian(cfg.circuit, flux, cfg.truncation)
    return diagonalize_and_label(model)


def _located_spots(cfg, workers):
    start, stop, steps = cfg.flux_sweep
    return find_sweet_spots(cfg.circuit, window=(start, stop), steps=steps,
                            trunc=cfg.truncation, area_ratio=cfg.area_ratio,
                            workers=workers)


def cmd_spectrum(args):
    cfg, outdir, _, meta, workers = _setup(args)
    start, stop, steps = cfg.flux_sweep
    fluxes = np.linspace(start, stop, steps)
    sweep = transition_sweep(cfg.circuit, fluxes, cfg.truncation,
                             area_ratio=cfg.area_ratio, workers=workers)
    curve = transition_frequencies(sweep, strict=False)
    _emit(outdir / "transitions.csv", meta,
          ("phi_ext", "f_ge_ghz", "f_gf_ghz", "flagged"),
          zip(curve.flux, curve.f_ge, curve.f_gf, curve.flagged))
    spots = find_sweet_spots(cfg.circuit, window=(start, stop), steps=steps,
                             trunc=cfg.truncation, area_ratio=cfg.area_ratio,
                             curve=curve, workers=workers)
    _emit(outdir / "sweet_spots.csv", meta,
          ("phi_ext", "f_ge_ghz", "chi0_mhz"),
          ((s.phi_ext, s.f_ge_ghz, s.chi0_mhz) for s in spots))
    return 0


def cmd_chi(args):
    cfg, outdir, _, meta, workers = _setup(args)
    phis = args.phi or [s.phi_ext for s in _located_spots(cfg, workers)]
    rows = []
    for phi in phis:
        spectrum = _spectrum_at(cfg, phi)
        curve = dispersive_curve(spectrum)
        for n, chi, flag in zip(curve.photon_index, curve.chi_mhz,
                                curve.flagged):
            rows.append((phi, int(n), chi,
                         ac_stark_shift(spectrum, int(n)), int(flag)))
    _emit(outdir / "chi.csv", meta,
          ("phi_ext", "n", "chi_mhz", "stark_mhz", "flagged"), rows)
    return 0


def cmd_snr_time(args):
    cfg, outdir, _, meta, workers = _setup(args)
    phi = args.phi if args.phi else _located_spots(cfg, workers)[-1].phi_ext
    spectrum = _spectrum_at(cfg, phi)
    curve = dispersive_curve(spectrum)
    grid = np.arange(args.nbar_min, args.nbar_max + 0.5, args.nbar_step)

    def chi_of(nb):
        return float(np.interp(nb, curve.photon_index, curve.chi_mhz))

    times = measurement_time_for_snr(args.snr_target, cfg.readout, chi_of,
                                     n_bar_grid=grid)
    rows = []
    for nb, tau in zip(grid, times):
        settings = replace(cfg.readout, n_bar=float(nb), tau_m_ns=float(tau))
        rows.append((phi, nb, chi_of(nb), tau, snr(settings, chi_of(nb))))
    _emit(outdir / "snr_time.csv", meta,
          ("phi_ext", "n_bar", "chi_mhz", "tau_m_ns", "snr"), rows)
    return 0


def cmd_jumps(args):
    cfg, outdir, seed, meta, _ = _setup(args)
    j = cfg.jumps
    sigma = 1.0 / j.snr
    centers = (TRACE_Q_G, TRACE_Q_E)
    if args.mode == "simulate":
        model = JumpModel(gamma_up=j.gamma_up_per_us,
                          gamma_down=j.gamma_down_per_us,
                          q_g=TRACE_Q_G, q_e=TRACE_Q_E, sigma=sigma,
                          seed=seed)
        trace = simulate_jump_trace(model, j.duration_ns, j.dt_ns)
        trace_meta = dict(meta)
        trace_meta.update(dt_ns=j.dt_ns, sigma=sigma,
                          q_g=TRACE_Q_G, q_e=TRACE_Q_E,
                          gamma_up_per_us=j.gamma_up_per_us,
                          gamma_down_per_us=j.gamma_down_per_us)
        _emit(outdir / "trace.csv", trace_meta, ("index", "I", "Q"),
              ((k, iq[0], iq[1]) for k, iq in enumerate(trace.samples)))
        return 0

    path = args.trace or (outdir / "trace.csv")
    file_meta, cols, rows = read_csv(path)
    dt_ns = float(file_meta.get("dt_ns", j.dt_ns))
    sigma = float(file_meta.get("sigma", sigma))
    centers = (float(file_meta.get("q_g", TRACE_Q_G)),
               float(file_meta.get("q_e", TRACE_Q_E)))
    samples = np.column_stack([column("I", cols, rows, path),
                               column("Q", cols, rows, path)])
    trace = IQTrace(dt_ns=dt_ns, samples=samples, meta=dict(file_meta))
    rotated, _ = rotate_to_q(trace)
    states = latching_filter(rotated, centers, sigma)
    window = max(1, round(cfg.readout.tau_m_ns / dt_ns))
    hists, est = dwell_statistics(states, dt_ns, qnd_window_samples=window)
    free_rate, free_err = free_decay_rate(rotated, centers, sigma)
    try:
        t_eff = effective_temperature(est.p_e, cfg.state_prep.f_ge_ghz)
    except Unphysical:
        t_eff = float("nan")
    _emit(outdir / "rates.csv", meta,
          ("gamma_up_per_us", "gamma_up_err", "gamma_down_per_us",
           "gamma_down_err", "p_e", "qnd_fidelity", "free_total_per_us",
           "free_total_err", "t_eff_mk"),
          [(est.gamma_up, est.gamma_up_err, est.gamma_down,
            est.gamma_down_err, est.p_e, est.qnd_fidelity, free_rate,
            free_err, t_eff)])
    for lab in ("g", "e"):
        h = hists[lab]
        _emit(outdir / f"dwell_{lab}.csv", meta,
              ("bin_lo_us", "bin_hi_us", "counts"),
              zip(h.bin_edges_us[:-1], h.bin_edges_us[1:], h.counts))
    return 0


def cmd_state_prep(args):
    cfg, outdir, seed, meta, _ = _setup(args)
    s = cfg.state_prep
    p_e0 = thermal_population(s.f_ge_ghz, s.t_mk) if s.t_mk > 0.0 else 0.0
    rows = []
    for target in s.targets:
        proto = ProtocolConfig(
            target=target, tau_m_ns=s.tau_m_ns, snr=s.snr,
            gamma_up=s.gamma_up_per_us, gamma_down=s.gamma_down_per_us,
            latency_ns=s.latency_ns,
            pi_pulse_duration_ns=s.pi_pulse_duration_ns,
            pi_pulse_error=s.pi_pulse_error, n_bar=cfg.readout.n_bar,
            initial_p_e=p_e0, f_leakage=s.f_leakage)
        report = run_state_prep(proto, s.shots, seed=seed)
        rows.append((target, report.shots, report.fidelity,
                     report.fidelity_err, report.error_transitions,
                     report.error_f_leakage, report.error_overlap))
        counts, edges = np.histogram(report.q_final, bins=HIST_BINS,
                                     range=HIST_RANGE)
        _emit(outdir / f"hist_final_{target}.csv", meta,
              ("bin_center", "counts"),
              zip(0.5 * (edges[:-1] + edges[1:]), counts))
    _emit(outdir / "state_prep.csv", meta,
          ("target", "shots", "fidelity", "fidelity_err",
           "error_transitions", "error_f_leakage", "error_overlap"), rows)
    return 0


def cmd_calibrate(args):
    cfg, outdir, _, meta, workers = _setup(args)
    _, cols, rows = read_csv(args.data)
    if rows.shape[0] < 2:
        raise InsufficientData("calibration needs at least 2 points")
    if "power" in cols and "shift_mhz" in cols:
        power = column("power", cols, rows, args.data)
        shift = column("shift_mhz", cols, rows, args.data)
    else:
        power, shift = rows[:, 0], rows[:, 1]
    if args.chi_mhz is not None:
        chi = args.chi_mhz
    else:
        phi = args.phi if args.phi else _located_spots(cfg, workers)[-1].phi_ext
        chi = dispersive_shift(_spectrum_at(cfg, phi), 0)
    fit = calibrate_photon_number(zip(power, shift), chi)
    _emit(outdir / "calibration.csv", meta,
          ("photons_per_power", "n_points", "rms_residual", "chi_mhz"),
          [(fit.photons_per_power, fit.n_points, fit.rms_residual, chi)])
    return 0


def cmd_fit_spectrum(args):
    cfg, outdir, _, meta, workers = _setup(args)
    _, cols, rows = read_csv(args.data)
    if rows.shape[0] < 4:
        raise InsufficientData(
            f"spectrum fit needs at least 4 points, got {rows.shape[0]}")
    if "phi_ext" in cols:
        fluxes = column("phi_ext", cols, rows, args.data)
        f_ge = column("f_ge_ghz", cols, rows, args.data)
        f_gf = (column("f_gf_ghz", cols, rows, args.data)
                if "f_gf_ghz" in cols else None)
    else:
        fluxes, f_ge = rows[:, 0], rows[:, 1]
        f_gf = rows[:, 2] if rows.shape[1] > 2 else None

    trunc = cfg.truncation.scaled(args.fit_scale)
    base = cfg.circuit
    names = ["E_J_prime", "E_J_dprime", "L", "C"]
    x0 = [getattr(base, n) for n in names]
    lo = [0.2 * v for v in x0]
    hi = [5.0 * v for v in x0]
    if args.float_ls:
        names.append("L_s")
        x0.append(base.L_s)
        lo.append(0.95 * base.L_s)
        hi.append(1.05 * base.L_s)

    def residuals(x):
        try:
            params = replace(base, **dict(zip(names, x)))
        except ValueError as err:
            raise FitDiverged(f"parameters left the physical region: {err}",
                              attempts=[list(x)]) from err
        sweep = transition_sweep(params, fluxes, trunc,
                                 area_ratio=cfg.area_ratio, workers=workers)
        curve = transition_frequencies(sweep, strict=False)
        res = curve.f_ge - f_ge
        if f_gf is not None:
            res = np.concatenate([res, curve.f_gf - f_gf])
        return np.where(np.isfinite(res), res, 10.0)

    result = least_squares(residuals, x0, bounds=(lo, hi), x_scale=x0,
                           xtol=1e-10, ftol=1e-10)
    if not result.success:
        raise FitDiverged(f"spectrum fit did not converge: {result.message}",
                          attempts=[list(result.x)])

    dof = max(result.fun.size - len(names), 1)
    scale = 2.0 * result.cost / dof
    try:
        cov = scale * np.linalg.pinv(result.jac.T @ result.jac)
        sigmas = np.sqrt(np.maximum(np.diag(cov), 0.0))
    except np.linalg.LinAlgError:
        sigmas = np.full(len(names), float("nan"))
    at_bound = 0
    if args.float_ls:
        ls = result.x[-1]
        if min(abs(ls - lo[-1]), abs(ls - hi[-1])) < 1e-9 * base.L_s:
            at_bound = 1

    fit_meta = dict(meta)
    fit_meta.update(rms_residual=float(np.sqrt(np.mean(result.fun**2))),
                    n_points=rows.shape[0], ls_at_bound=at_bound,
                    ls_floated=int(args.float_ls), nfev=result.nfev)
    _emit(outdir / "fit_result.csv", fit_meta, ("param", "value", "sigma"),
          zip(names, result.x, sigmas))
    fitted = replace(base, **dict(zip(names, result.x)))
    save_config(replace(cfg, circuit=fitted), outdir / "fitted_config.yaml")
    print(f"wrote {outdir / 'fitted_config.yaml'}")
    return 0


def build_parser():
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="path to a YAML run configuration")
    shared.add_argument("--out", help="output directory (overrides config)")
    shared.add_argument("--seed", type=int, help="seed override")
    shared.add_argument("--workers", type=int,
                        help="worker pool size (default: all cores)")
    shared.add_argument("--format", choices=("csv",), default="csv",
                        help="output format")

    parser = argparse.ArgumentParser(
        prog="fluxsim",
        description="Flux-tunable atom readout simulator")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", parents=[shared],
                       help="transition curve over the flux sweep")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("chi", parents=[shared],
                       help="dispersive shift vs photon number")
    p.add_argument("--phi", type=float, action="append",
                   help="flux point(s); default: locate the sweet spots")
    p.set_defaults(func=cmd_chi)

    p = sub.add_parser("snr-time", parents=[shared],
                       help="measurement time to reach a target SNR")
    p.add_argument("--phi", type=float,
                   help="flux point; default: last located sweet spot")
    p.add_argument("--snr-target", type=float, default=3.0)
    p.add_argument("--nbar-min", type=float, default=2.0)
    p.add_argument("--nbar-max", type=float, default=140.0)
    p.add_argument("--nbar-step", type=float, default=2.0)
    p.set_defaults(func=cmd_snr_time)

    p = sub.add_parser("jumps", parents=[shared],
                       help="synthesize or analyze a quantum-jump trace")
    p.add_argument("mode", choices=("simulate", "analyze"))
    p.add_argument("--trace", help="trace CSV for analyze "
                                   "(default: <out>/trace.csv)")
    p.set_defaults(func=cmd_jumps)

    p = sub.add_parser("state-prep", parents=[shared],
                       help="feedback state preparation with error budget")
    p.set_defaults(func=cmd_state_prep)

    p = sub.add_parser("calibrate", parents=[shared],
                       help="photon-number calibration from shift data")
    p.add_argument("--data", required=True,
                   help="CSV of (power, shift_mhz) points")
    p.add_argument("--chi-mhz", type=float,
                   help="per-photon shift; default: model value at --phi")
    p.add_argument("--phi", type=float,
                   help="flux point for the model per-photon shift")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("fit-spectrum", parents=[shared],
                       help="fit circuit parameters to a measured curve")
    p.add_argument("--data", required=True,
                   help="CSV of (phi_ext, f_ge_ghz[, f_gf_ghz]) points")
    p.add_argument("--float-ls", action="store_true",
                   help="let the shared inductance vary within 5 percent")
    p.add_argument("--fit-scale", type=float, default=0.4,
                   help="truncation scale factor used during fitting")
    p.set_defaults(func=cmd_fit_spectrum)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except InsufficientData as err:
        print(f"insufficient data: {err}", file=sys.stderr)
        return 4
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

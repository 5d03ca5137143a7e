#!/usr/bin/env python3
"""Run the feedback state-preparation protocol for both targets and print
the measured fidelity next to the per-source error budget.
"""

import argparse

from fluxsim.feedback import ProtocolConfig, error_budget, run_state_prep
from fluxsim.jumps import thermal_population


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--shots", type=int, default=20_000)
    ap.add_argument("--snr", type=float, default=3.0)
    ap.add_argument("--tau-m-ns", type=float, default=560.0)
    ap.add_argument("--latency-ns", type=float, default=428.0)
    ap.add_argument("--gamma-up", type=float, default=1.0 / 300.0)
    ap.add_argument("--gamma-down", type=float, default=1.0 / 20.0)
    ap.add_argument("--pi-error", type=float, default=0.01)
    ap.add_argument("--f-leakage", type=float, default=0.01)
    ap.add_argument("--f-ge-ghz", type=float, default=1.137874)
    ap.add_argument("--t-mk", type=float, default=31.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    p_e0 = thermal_population(args.f_ge_ghz, args.t_mk)
    print(f"thermal initial p_e = {p_e0:.4f}")
    for target in ("g", "e"):
        config = ProtocolConfig(
            target=target, tau_m_ns=args.tau_m_ns, snr=args.snr,
            gamma_up=args.gamma_up, gamma_down=args.gamma_down,
            latency_ns=args.latency_ns, pi_pulse_error=args.pi_error,
            initial_p_e=p_e0, f_leakage=args.f_leakage)
        report = run_state_prep(config, args.shots, seed=args.seed)
        budget = error_budget(config)
        print(f"target {target}: fidelity {report.fidelity:.4f} "
              f"+- {report.fidelity_err:.4f}")
        print(f"  budget: transitions {100 * budget.transitions:.2f} %  "
              f"leakage {100 * budget.f_leakage:.2f} %  "
              f"overlap {100 * budget.overlap:.2f} %")


if __name__ == "__main__":
    main()

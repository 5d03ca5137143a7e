#!/usr/bin/env python3
"""Render the CSV outputs of the command-line tool as PNG figures.

Optional helper: nothing in the package depends on it, and it needs
matplotlib.  Point it at an output directory produced by the tool.
"""

import argparse
import sys
from pathlib import Path

from fluxsim.csvio import column, read_csv

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("plot_results needs matplotlib (pip install matplotlib)",
          file=sys.stderr)
    sys.exit(1)


def plot_transitions(outdir):
    _, cols, rows = read_csv(outdir / "transitions.csv")
    fig, ax = plt.subplots(figsize=(6, 4))
    phi = column("phi_ext", cols, rows)
    ax.plot(phi, column("f_ge_ghz", cols, rows), label="f_ge")
    ax.plot(phi, column("f_gf_ghz", cols, rows), label="f_gf")
    ax.set_xlabel("external flux (Phi_0)")
    ax.set_ylabel("transition (GHz)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(outdir / "transitions.png", dpi=150)
    print(f"wrote {outdir / 'transitions.png'}")


def plot_chi(outdir):
    _, cols, rows = read_csv(outdir / "chi.csv")
    phi = column("phi_ext", cols, rows)
    fig, ax = plt.subplots(figsize=(6, 4))
    for value in sorted(set(phi)):
        mask = phi == value
        ax.plot(column("n", cols, rows)[mask],
                column("chi_mhz", cols, rows)[mask],
                label=f"phi_ext = {value:.4f}")
    ax.axhline(0.0, color="gray", lw=0.5)
    ax.set_xlabel("photon number n")
    ax.set_ylabel("chi (MHz)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(outdir / "chi.png", dpi=150)
    print(f"wrote {outdir / 'chi.png'}")


def plot_histograms(outdir):
    fig, ax = plt.subplots(figsize=(6, 4))
    found = False
    for target in ("g", "e"):
        path = outdir / f"hist_final_{target}.csv"
        if not path.exists():
            continue
        _, cols, rows = read_csv(path)
        ax.step(column("bin_center", cols, rows),
                column("counts", cols, rows), where="mid",
                label=f"target {target}")
        found = True
    if not found:
        return
    ax.set_xlabel("integrated Q (normalized)")
    ax.set_ylabel("counts")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(outdir / "state_prep_hist.png", dpi=150)
    print(f"wrote {outdir / 'state_prep_hist.png'}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("outdir", type=Path,
                    help="directory holding the tool's CSV outputs")
    args = ap.parse_args()
    plotted = False
    for name, fn in (("transitions.csv", plot_transitions),
                     ("chi.csv", plot_chi),
                     ("hist_final_g.csv", plot_histograms),
                     ("hist_final_e.csv", plot_histograms)):
        if (args.outdir / name).exists():
            fn(args.outdir)
            plotted = True
            if fn is plot_histograms:
                break
    if not plotted:
        print(f"no known CSVs under {args.outdir}", file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    main()

"""Plot one or more `drivefit bode` CSVs on shared magnitude/phase axes.

    python scripts/plot_bode.py model.csv measured.csv -o bode.png
"""
import argparse
import csv

import matplotlib.pyplot as plt


def read(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.DictReader(fh)]
    return ([float(r["f_hz"]) for r in rows], [float(r["mag_db"]) for r in rows], [float(r["phase_deg"]) for r in rows])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("csv", nargs="+")
    ap.add_argument("-o", "--out", default="bode.png")
    args = ap.parse_args()
    fig, (mag, phase) = plt.subplots(2, 1, sharex=True, figsize=(6, 5))
    for path in args.csv:
        f, m, p = read(path)
        mag.semilogx(f, m, label=path)
        phase.semilogx(f, p)
    mag.set_ylabel("magnitude [dB]")
    phase.set_ylabel("phase [deg]")
    phase.set_xlabel("frequency [Hz]")
    mag.legend()
    mag.grid(True, which="both", alpha=0.3)
    phase.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()

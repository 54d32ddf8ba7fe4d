"""Plot a fit's loss trace and, optionally, the delta phase portrait from `evaluate`.

    python scripts/plot_fit.py fit.trace.csv --delta eval.delta.csv --joint 0
"""
import argparse
import csv

import matplotlib.pyplot as plt


def columns(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: [float(r[k]) for r in rows] for k in rows[0]}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("trace")
    ap.add_argument("--delta")
    ap.add_argument("--joint", type=int, default=0)
    ap.add_argument("-o", "--out", default="fit.png")
    args = ap.parse_args()
    panels = 2 if args.delta else 1
    fig, axes = plt.subplots(1, panels, figsize=(5 * panels, 4), squeeze=False)
    t = columns(args.trace)
    axes[0][0].semilogy(t["iteration"], t["best_loss"])
    axes[0][0].set_xlabel("iteration")
    axes[0][0].set_ylabel("best loss [rad²]")
    if args.delta:
        d = columns(args.delta)
        j = args.joint
        axes[0][1].plot(d[f"dq{j}"], d[f"dqd{j}"], lw=0.5)
        axes[0][1].plot([0], [0], "k+")
        axes[0][1].set_xlabel("Δq [rad]")
        axes[0][1].set_ylabel("Δq̇ [rad/s]")
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()

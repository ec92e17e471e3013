#!/usr/bin/env python3
"""Bar charts of bias, variance and MSE from an interference-lab results CSV."""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv", help="output of `interference-lab run` or `exact`")
    ap.add_argument("--out", default="results.png")
    ap.add_argument("--log", action="store_true", help="log scale for var and mse")
    args = ap.parse_args()

    df = pd.read_csv(args.csv)
    if df.empty:
        raise SystemExit("no results in " + args.csv)
    df["label"] = df["strategy"] + "/" + df["estimator"]

    fig, axes = plt.subplots(1, 3, figsize=(15, 0.35 * len(df) + 2), sharey=True)
    for ax, col in zip(axes, ["bias", "var", "mse"]):
        err = 2 * df["bias_se"] if col == "bias" else None
        ax.barh(df["label"], df[col], xerr=err, color="tab:blue")
        ax.set_title(col)
        if col == "bias":
            ax.axvline(0, color="k", lw=0.8)
        elif args.log:
            ax.set_xscale("log")
    axes[0].invert_yaxis()
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Bar charts of the overlap histograms written by `cognet stats`."""

import argparse
import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("histogram_csv")
    parser.add_argument("--out-dir", default=None, help="defaults to the CSV's directory")
    args = parser.parse_args()

    with open(args.histogram_csv) as f:
        rows = list(csv.DictReader(f))
    lows = [float(r["bin_low"]) for r in rows]
    width = float(rows[0]["bin_high"]) - lows[0]
    out_dir = args.out_dir or os.path.dirname(os.path.abspath(args.histogram_csv))
    titles = {
        "repeated_proportion": "share of current medications seen in earlier visits",
        "history_jaccard": "Jaccard between current and earlier medications",
    }
    for column, title in titles.items():
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.bar(lows, [int(r[column]) for r in rows], width=width, align="edge", edgecolor="black")
        ax.set_xlim(0, 1)
        ax.set_xlabel(title)
        ax.set_ylabel("visits")
        fig.tight_layout()
        path = os.path.join(out_dir, f"{column}.png")
        fig.savefig(path, dpi=150)
        print(path)


if __name__ == "__main__":
    main()

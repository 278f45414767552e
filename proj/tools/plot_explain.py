#!/usr/bin/env python3
"""Heatmap of copy probabilities from `cognet explain` output."""

import argparse
import json

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("explain_json")
    parser.add_argument("--out", default=None, help="image path (default: input with .png)")
    args = parser.parse_args()

    with open(args.explain_json) as f:
        report = json.load(f)
    matrix = report["copy_probabilities"]
    columns = [m["code"] for m in report["history_medications"]]
    rows = [s["code"] for s in report["steps"]]
    if not matrix or not columns:
        raise SystemExit("nothing to plot: empty copy matrix")

    fig, ax = plt.subplots(figsize=(1 + 0.5 * len(columns), 1 + 0.4 * len(rows)))
    image = ax.imshow(matrix, cmap="Blues", vmin=0.0, vmax=max(max(r) for r in matrix), aspect="auto")
    ax.set_xticks(range(len(columns)), columns, rotation=90)
    ax.set_yticks(range(len(rows)), [f"{i + 1}: {c}" for i, c in enumerate(rows)])
    ax.set_xlabel("historical medication")
    ax.set_ylabel("decoding step (emitted code)")
    ax.set_title(f"patient {report['patient_id']}, visit {report['visit']}")
    fig.colorbar(image, ax=ax, label="copy probability")
    fig.tight_layout()
    out = args.out or args.explain_json.rsplit(".", 1)[0] + ".png"
    fig.savefig(out, dpi=150)
    print(out)


if __name__ == "__main__":
    main()

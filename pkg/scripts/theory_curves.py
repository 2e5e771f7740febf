"""Tabulate the limit density family for one rank pair over several LID values."""

import argparse
import csv

import numpy as np

from nnperturb.cli import THEORY_HEADER, theory_rows
from nnperturb.model import RankPair


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--kt", type=int, default=2)
    p.add_argument("--kx", type=int, default=4)
    p.add_argument("--lid", type=float, nargs="+", default=[10, 20, 30, 40, 50, 60, 70])
    p.add_argument("--grid", type=int, default=4001)
    p.add_argument("--out", default="theory_curves.csv")
    args = p.parse_args()

    ranks = RankPair(args.kt, args.kx)
    rows = list(theory_rows(ranks, args.lid, args.grid))
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(THEORY_HEADER)
        w.writerows(rows)
    for lid in args.lid:
        markers = {r[1]: float(r[2]) for r in rows if float(r[0]) == lid and r[1] != "curve"}
        curve = np.array([[float(r[2]), float(r[4])] for r in rows if float(r[0]) == lid and r[1] == "curve"])
        mass = np.trapezoid(curve[:, 1], curve[:, 0])
        print(f"lid {lid:5g}: mean {markers['expectation']:.4f} median {markers['median']:.4f} "
              f"mode {markers['mode']:.4f} pdf mass {mass:.5f}")


if __name__ == "__main__":
    main()

"""Mesh study for f = x + 1 against the closed-form solution.

    python3 scripts/affine_study.py [--out results/affine.csv]
"""
import argparse
import math
import time
from pathlib import Path

from nonspurious.analysis import StudySchedule, run_convergence_study
from nonspurious.nonlinearity import from_catalogue


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-power", type=int, default=12)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()

    ns = tuple(2**j for j in range(4, args.max_power + 1))
    t0 = time.perf_counter()
    rep = run_convergence_study(from_catalogue("affine"), StudySchedule(ns))
    elapsed = time.perf_counter() - t0

    print(f"{'n':>6} {'e_n':>12} {'Q_n':>10} {'N_n':>10}")
    for row in rep.rows:
        print(f"{row.n:>6} {row.e_n:12.4e} {row.Q_n:10.6f} {row.N_n:10.6f}")
    print(f"rate {rep.rate:.4f}  R² {rep.r2:.8f}  ({elapsed:.2f} s)")
    print(f"Q_n -> {rep.rows[-1].Q_n:.6f}, tanh(1/2) = {math.tanh(0.5):.6f}")
    for k, v in rep.verdicts.items():
        print(f"  {k}: {v}")
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(rep.to_csv(), encoding="utf-8")


if __name__ == "__main__":
    main()

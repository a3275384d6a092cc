"""Linear three-case demo: where the discrete problem loses or gains solutions."""
import argparse

from nonspurious.analysis import spurious_demo


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ns", type=lambda s: tuple(int(v) for v in s.split(",")), default=(4, 10, 50))
    args = ap.parse_args()

    demo = spurious_demo(args.ns)
    for c in demo.cases:
        mark = "ok" if c["matches"] else "MISMATCH"
        print(f"n={c['n']:<4} {c['case']}  lambda={c['lambda']:.6g}  beta={c['beta']:<4} -> {c['outcome']:<12} {mark}")
    print()
    for g in demo.case1_gap:
        print(f"n={g['n']:<4} {g['lambda_1']:.6g} < pi²/n² = {g['lambda']:.6g} < {g['lambda_2']:.6g}: {g['between']}")
    print("all match:", demo.all_match)


if __name__ == "__main__":
    main()

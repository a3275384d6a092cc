"""Hypothesis verdicts for every catalogue entry, and a solve at n=64 where allowed."""
from nonspurious.nonlinearity import CATALOGUE, check_H2a, from_catalogue
from nonspurious.solver import DiscreteBVP, newton_solve


def fmt(v):
    if v.passed:
        return "pass"
    return "fail@" + ",".join(f"{w:.3g}" for w in v.witness)


def main():
    print(f"{'entry':<11} {'c':>8} {'H1':>14} {'H2':>14} {'H2a':>14} {'max|x|':>10}")
    for name in CATALOGUE:
        nl = from_catalogue(name)
        h2a = fmt(check_H2a(nl)) if nl.h2a else "-"
        if nl.h1.passed and nl.h2.passed:
            sol = f"{newton_solve(DiscreteBVP(64, nl)).max_abs_value:10.6f}"
        else:
            sol = f"{'-':>10}"
        print(f"{name:<11} {nl.c:8.4f} {fmt(nl.h1):>14} {fmt(nl.h2):>14} {h2a:>14} {sol}")


if __name__ == "__main__":
    main()

"""Acceptance criteria. Each test prints one PASS/FAIL line at its stated tolerance."""
import math
import time

import numpy as np
import pytest

from nonspurious.analysis import (
    BOUND_SLACK,
    DEFAULT_SCHEDULE,
    StudySchedule,
    coercivity_lower_bound,
    fit_rate,
    lambda1,
    laplacian_smallest_eigenvalue,
    n0_for,
    random_states,
    run_convergence_study,
    spurious_demo,
    stabilized,
    verify_h2a_chain,
)
from nonspurious.grid import (
    GridFunction,
    lower_embedding_constant,
    max_norm,
    max_norm_embedding_constant,
    norm_0,
    norm_E,
    upper_embedding_constant,
)
from nonspurious.nonlinearity import (
    CATALOGUE,
    build,
    check_H1,
    check_H2,
    check_H2a,
    from_catalogue,
)
from nonspurious.solver import (
    DiscreteBVP,
    energy,
    gradient,
    hessian_tridiag,
    newton_solve,
)

H2_ENTRIES = [k for k in CATALOGUE if from_catalogue(k).h2.passed]
H2A_ENTRIES = [k for k in CATALOGUE if CATALOGUE[k].h2a is not None]
# sqrt has a kink at x = 0 and only a finite-difference fx
SMOOTH_ENTRIES = [k for k in CATALOGUE if k != "sqrt"]


@pytest.fixture(scope="module")
def affine_study():
    t0 = time.perf_counter()
    rep = run_convergence_study(from_catalogue("affine"), StudySchedule(DEFAULT_SCHEDULE))
    return rep, time.perf_counter() - t0


def test_affine_benchmark(criterion, affine_study):
    rep, elapsed = affine_study
    e = rep.column("e_n")
    rate, r2 = fit_rate(rep.column("n"), e)
    monotone = bool(np.all(np.diff(e) < 0))
    ok = monotone and abs(rate - 2.0) <= 0.1 and r2 > 0.99 and elapsed < 10.0
    criterion(
        "affine benchmark: e_n decreasing, rate 2.0±0.1, R²>0.99, <10 s",
        ok,
        f"rate={rate:.5f} R²={r2:.8f} time={elapsed:.2f}s decreasing={monotone}",
    )


def test_a_priori_bound_suite(criterion, affine_study):
    rep, _ = affine_study
    worst = {"norm": -math.inf, "embed": -math.inf, "N": -math.inf}
    ok = abs(rep.c - 1.0) < 1e-12
    for r in rep.reports:
        n = r.n
        norm_rhs = 2 * rep.c * math.sqrt(n - 1) / n
        emb_rhs = math.sqrt(n + 1) / 2 * r.norm_E_value
        worst["norm"] = max(worst["norm"], r.norm_E_value - norm_rhs)
        worst["embed"] = max(worst["embed"], r.max_abs_value - emb_rhs)
        worst["N"] = max(worst["N"], r.max_abs_value - rep.c)
    ok = ok and all(v <= BOUND_SLACK for v in worst.values())
    detail = " ".join(f"{k}:{v:.3e}" for k, v in worst.items())
    criterion("a-priori bounds on every n, slack 1e-9 (worst lhs-rhs)", ok, detail)


def test_slope_stabilization(criterion, affine_study):
    rep, _ = affine_study
    Q = rep.column("Q_n")
    limit = math.tanh(0.5)
    ok = stabilized(Q, 0.05) and abs(Q[-1] - limit) <= 1e-3
    criterion(
        "Q_n stabilizes within 5% and tends to tanh(1/2) within 1e-3",
        ok,
        f"Q_last={Q[-1]:.6f} tanh(1/2)={limit:.6f}",
    )


def test_linear_examples(criterion):
    demo = spurious_demo(ns=(4, 10, 50))
    got = {(c["case"], c["n"]): c["outcome"] for c in demo.cases}
    want = {}
    for n in (4, 10, 50):
        want[("case1", n)] = "unique-zero"
        want[("case2", n)] = "unique"
        want[("case3", n)] = "no-solution"
    ok = got == want and demo.all_match
    criterion(
        "linear examples at n in {4,10,50}: zero / unique / no solution",
        ok,
        ", ".join(f"{k[0]}@{k[1]}={v}" for k, v in sorted(got.items(), key=lambda kv: (kv[0][1], kv[0][0]))),
    )


def _fd_gradient(p, x, h=1e-6):
    out = np.empty(p.n - 1)
    for j in range(p.n - 1):
        e = np.zeros(p.n + 1)
        e[j + 1] = h
        up = energy(p, GridFunction(p.n, x.values + e))
        dn = energy(p, GridFunction(p.n, x.values - e))
        out[j] = (up - dn) / (2 * h)
    return out


def test_gradient_and_hessian(criterion):
    rng = np.random.default_rng(2024)
    h = 1e-6
    worst_g = worst_h = 0.0
    states = 0
    for n in (4, 16, 64):
        for name in SMOOTH_ENTRIES:
            p = DiscreteBVP(n, from_catalogue(name))
            for _ in range(100):
                x = GridFunction.random(n, rng)
                g = gradient(p, x).interior
                fd = _fd_gradient(p, x, h)
                worst_g = max(worst_g, np.max(np.abs(g - fd)) / max(1.0, np.max(np.abs(g))))

                v = rng.uniform(-1, 1, n - 1)
                Hv = hessian_tridiag(p, x).matvec(v)
                xp = GridFunction.from_interior(x.interior + h * v)
                xm = GridFunction.from_interior(x.interior - h * v)
                fdh = (gradient(p, xp).interior - gradient(p, xm).interior) / (2 * h)
                worst_h = max(worst_h, np.max(np.abs(Hv - fdh)) / max(1.0, np.max(np.abs(Hv))))
                states += 1
    ok = worst_g <= 1e-5 and worst_h <= 1e-5
    criterion(
        "gradient and Hessian·v vs finite differences, 1e-5 relative",
        ok,
        f"{states} states, worst grad={worst_g:.2e} hess={worst_h:.2e}",
    )


def test_convexity_and_uniqueness(criterion):
    rng = np.random.default_rng(17)
    n = 32
    spread = 0.0
    worst_gap = math.inf
    for name in H2_ENTRIES:
        p = DiscreteBVP(n, from_catalogue(name))
        sols = []
        for _ in range(20):
            x0 = GridFunction.random(n, rng, 10.0)
            sols.append(newton_solve(p, x0=x0, override_assumptions=True).solution.values)
        sols = np.array(sols)
        spread = max(spread, float(np.max(np.abs(sols - sols[0]))))

        for _ in range(1000):
            x = GridFunction.random(n, rng, 3.0)
            y = GridFunction.random(n, rng, 3.0)
            mid = GridFunction.from_interior(0.5 * (x.interior + y.interior))
            ex, ey = energy(p, x), energy(p, y)
            gap = 0.5 * (ex + ey) - energy(p, mid)
            worst_gap = min(worst_gap, gap + 1e-12 * (abs(ex) + abs(ey)))
    ok = spread <= 1e-10 and worst_gap >= 0.0
    criterion(
        f"uniqueness from 20 starts and midpoint convexity ({', '.join(H2_ENTRIES)})",
        ok,
        f"max spread={spread:.2e} min gap={worst_gap:.3e}",
    )


def test_coercivity_inequalities(criterion):
    rng = np.random.default_rng(31)
    worst = math.inf
    checked = 0
    ns = (4, 16, 64, 256)
    for name in H2_ENTRIES:
        nl = from_catalogue(name)
        for n in ns:
            p = DiscreteBVP(n, nl)
            for x in random_states(n, 1000 // len(ns), rng):
                lhs = energy(p, x)
                margin = lhs - coercivity_lower_bound(norm_E(x), nl.c, n)
                worst = min(worst, margin + BOUND_SLACK + 1e-13 * abs(lhs))
                checked += 1
    rel_ok = worst >= 0.0

    chain = []
    for name in H2A_ENTRIES:
        nl = from_catalogue(name)
        a, b, gamma = nl.h2a
        for n in sorted({16, 64, n0_for(a, b, gamma)}):
            p = DiscreteBVP(n, nl)
            r = newton_solve(p, override_assumptions=not nl.h2.passed)
            v = verify_h2a_chain(p, r, a, b, gamma, rng, samples=100)
            chain.append((name, n, v.rel_add_coer_random and v.rel_add_coer_solution))
    add_ok = all(ok for *_, ok in chain)
    criterion(
        "coercivity lower bounds (plain and sublinear-growth forms)",
        rel_ok and add_ok,
        f"plain: {checked} states, worst margin {worst:.3e}; growth: "
        + ", ".join(f"{nm}@{n}={'ok' if ok else 'FAIL'}" for nm, n, ok in chain),
    )


def test_spectral(criterion):
    worst = max(abs(lambda1(n) - laplacian_smallest_eigenvalue(n)) for n in range(1, 201))

    # independent scan of b/(gamma+1) n^((gamma-1)/2) < 1/4 for (1, 1, 0.5)
    scan = next(n for n in range(1, 10_000) if (1 / 1.5) * n ** (-0.25) < 0.25)
    n0 = n0_for(1, 1, 0.5)
    ok = worst <= 1e-10 and n0 == 51 == scan
    criterion(
        "lambda1 vs Sturm bisection for n=1..200, n0_for(1,1,0.5)=51",
        ok,
        f"max diff={worst:.2e} n0={n0} scan={scan}",
    )


# three entries passing everything they claim, three built to fail one hypothesis each
ASSUMPTION_CASES = [
    ("affine", dict(H1=True, H2=True)),
    ("atan-shift", dict(H1=True, H2=True, H2a=True)),
    ("cubic", dict(H1=True, H2=True)),
    ("atan", dict(H1=False, H2=True)),
    ("sqrt", dict(H1=True, H2=False, H2a=True)),
    ("superlinear", dict(H1=True, H2=True, H2a=False)),
]


def _assumption_entry(name):
    if name == "superlinear":
        return build("x^3 + 1", "x^4/4 + x", h2a=(1.0, 1.0, 0.5), label=name)
    return from_catalogue(name)


def test_assumption_checkers(criterion):
    rows = []
    ok = True
    checks = {"H1": check_H1, "H2": check_H2, "H2a": check_H2a}
    for name, expected in ASSUMPTION_CASES:
        nl = _assumption_entry(name)
        for hyp, want in expected.items():
            v = checks[hyp](nl)
            good = v.passed == want and (v.passed or v.witness is not None)
            ok &= good
            if not v.passed:
                rows.append(f"{name}:{hyp} fails at {tuple(round(w, 4) for w in v.witness)}")
            elif not good:
                rows.append(f"{name}:{hyp} unexpectedly passes")
    failures = sum(1 for _, exp in ASSUMPTION_CASES if not all(exp.values()))
    ok = ok and failures == 3
    criterion("H1/H2/H2a verdicts on six entries, witnesses for failures", ok, "; ".join(rows))


def test_embeddings(criterion):
    rng = np.random.default_rng(99)
    worst = -math.inf
    # vectorized over all even n, the library norms on the powers of two
    for n in range(2, 1025, 2):
        X = np.zeros((1000, n + 1))
        X[:, 1:-1] = rng.uniform(-1, 1, (1000, n - 1)) * 10.0 ** rng.uniform(-3, 3, (1000, 1))
        nE = np.sqrt(np.sum(np.diff(X, axis=1) ** 2, axis=1))
        n0 = np.sqrt(np.sum(X[:, 1:-1] ** 2, axis=1))
        nmax = np.max(np.abs(X), axis=1)
        lo = lower_embedding_constant(n) * nE - n0
        hi = n0 - upper_embedding_constant(n) * nE
        mx = nmax - max_norm_embedding_constant(n) * nE
        worst = max(worst, float(np.max(np.maximum(np.maximum(lo, hi), mx) / np.maximum(nE, 1e-300))))
        if n & (n - 1) == 0:
            for row in X:
                x = GridFunction(n, row)
                e = norm_E(x)
                worst = max(
                    worst,
                    (lower_embedding_constant(n) * e - norm_0(x)) / e,
                    (norm_0(x) - upper_embedding_constant(n) * e) / e,
                    (max_norm(x) - max_norm_embedding_constant(n) * e) / e,
                )
    ok = worst <= 1e-12
    criterion(
        "norm embeddings on 1000 random functions per even n up to 1024",
        ok,
        f"worst relative excess={worst:.3e}",
    )

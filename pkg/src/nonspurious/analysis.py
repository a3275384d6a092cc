"""Convergence studies, a-priori bound checks and spectral quantities."""
from __future__ import annotations

import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .grid import GridFunction, norm_E
from .nonlinearity import Nonlinearity
from .oracle import Oracle, closed_form, fine_grid_reference
from .solver import (
    DiscreteBVP,
    NewtonConfig,
    SolveReport,
    SolverError,
    _energy,
    linear_bvp_solve,
    newton_solve,
)

BOUND_SLACK = 1e-9
DEFAULT_SCHEDULE = tuple(2**j for j in range(4, 13))
CSV_HEADER = "n,e_n,Q_n,N_n,norm_E,iterations"


def worker_count() -> int:
    env = os.environ.get("NONSPURIOUS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# spectral quantities


def lambda1(n: int) -> float:
    """Smallest eigenvalue 2 - 2cos(pi/(n+1)) of -Δ² on n interior nodes.

    Evaluated as 4 sin²(pi / (2(n+1))) to avoid cancellation.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    return 4.0 * math.sin(math.pi / (2 * (n + 1))) ** 2


def sturm_count(diag, off, x: float) -> int:
    """Number of eigenvalues below x of the symmetric tridiagonal matrix.

    ``off`` is a scalar or the array of n-1 off-diagonal entries.
    """
    diag = np.asarray(diag, dtype=float)
    off2 = np.broadcast_to(np.asarray(off, dtype=float) ** 2, (max(len(diag) - 1, 0),))
    count = 0
    q = 1.0
    tiny = np.finfo(float).tiny
    for i, d in enumerate(diag):
        q = d - x - (off2[i - 1] / q if i else 0.0)
        if q == 0.0:
            q = -tiny
        if q < 0:
            count += 1
    return count


def smallest_eigenvalue(diag, off, tol: float = 1e-14) -> float:
    """Smallest eigenvalue by bisection on the Sturm count."""
    diag = np.asarray(diag, dtype=float)
    radius = 2.0 * float(np.max(np.abs(off))) if len(diag) > 1 else 0.0
    lo = float(diag.min()) - radius
    hi = float(diag.max()) + radius
    while hi - lo > tol * max(1.0, abs(lo) + abs(hi)):
        mid = 0.5 * (lo + hi)
        if sturm_count(diag, off, mid) >= 1:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def laplacian_smallest_eigenvalue(n: int) -> float:
    """Sturm-bisection smallest eigenvalue of tridiag(-1, 2, -1) of size n."""
    return smallest_eigenvalue(np.full(n, 2.0), -1.0)


def n0_for(a: float, b: float, gamma: float) -> int:
    """Smallest n with b/(gamma+1) n^((gamma-1)/2) < 1/4, by direct scan."""
    if not (b > 0 and 0 <= gamma < 1):
        raise ValueError("need b > 0 and gamma in [0, 1)")
    coef = b / (gamma + 1.0)
    n = 1
    while coef * n ** ((gamma - 1.0) / 2.0) >= 0.25:
        n += 1
    return n


# ---------------------------------------------------------------------------
# bound verification


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    holds: bool


def _bound(lhs, rhs, slack=BOUND_SLACK):
    return BoundCheck(float(lhs), float(rhs), bool(lhs <= rhs + slack))


def verify_theorem3_bounds(r: SolveReport, c: float) -> dict:
    """The three a-priori bounds on the minimiser x^n.

    norm_bound:  |x^n|_E <= 2c sqrt(n-1)/n
    embedding:   max|x^n| <= sqrt(n+1)/2 |x^n|_E
    N_bound:     max|x^n| <= c
    """
    n = r.n
    return {
        "norm_bound": _bound(r.norm_E_value, 2.0 * abs(c) * math.sqrt(n - 1) / n),
        "embedding": _bound(r.max_abs_value, math.sqrt(n + 1) / 2.0 * r.norm_E_value),
        "N_bound": _bound(r.max_abs_value, abs(c)),
    }


def coercivity_lower_bound(norm: float, c: float, n: int) -> float:
    """½|x|² - |c| sqrt(n-1)/n |x|."""
    return 0.5 * norm**2 - abs(c) * math.sqrt(n - 1) / n * norm


def h2a_lower_bound(norm: float, a: float, b: float, gamma: float, n: int) -> float:
    """½|x|² - |a| sqrt(n-1)/n |x| - b/(gamma+1) n^((gamma-1)/2) |x|^(gamma+1)."""
    return (
        0.5 * norm**2
        - abs(a) * math.sqrt(n - 1) / n * norm
        - b / (gamma + 1.0) * n ** ((gamma - 1.0) / 2.0) * norm ** (gamma + 1.0)
    )


def random_states(n: int, count: int, rng: np.random.Generator, log_scale=(-2.0, 2.0)):
    """Random grid functions with amplitudes spread log-uniformly."""
    for _ in range(count):
        scale = 10.0 ** rng.uniform(*log_scale)
        yield GridFunction.random(n, rng, scale)


@dataclass
class H2aChainVerdict:
    n: int
    n0: int
    states_checked: int
    rel_add_coer_random: bool
    rel_add_coer_solution: bool
    worst_margin: float
    N_bound: str  # "true" | "false" | "indeterminate-by-paper"
    N_bound_observed: bool

    def to_dict(self):
        return asdict(self)


def verify_h2a_chain(
    p: DiscreteBVP,
    r: SolveReport,
    a: float,
    b: float,
    gamma: float,
    rng: Optional[np.random.Generator] = None,
    samples: int = 100,
) -> H2aChainVerdict:
    """Check the sublinear-growth coercivity estimate and the 2a max-norm bound.

    The argument behind max|x^n| <= 2a only covers n >= n0 with
    |x^n|_E > 1; otherwise the verdict is "indeterminate-by-paper".
    """
    rng = rng or np.random.default_rng(0)
    n = p.n
    worst = math.inf
    ok_random = True
    for x in random_states(n, samples, rng):
        lhs = _energy(p, x.interior)
        rhs = h2a_lower_bound(norm_E(x), a, b, gamma, n)
        margin = lhs - rhs
        worst = min(worst, margin)
        ok_random &= margin >= -(BOUND_SLACK + 1e-13 * abs(lhs))
    lhs = r.energy
    rhs = h2a_lower_bound(r.norm_E_value, a, b, gamma, n)
    ok_sol = lhs - rhs >= -BOUND_SLACK
    worst = min(worst, lhs - rhs)

    n0 = n0_for(a, b, gamma)
    observed = r.max_abs_value <= 2.0 * a + BOUND_SLACK
    if n >= n0 and r.norm_E_value > 1.0:
        nb = "true" if observed else "false"
    else:
        nb = "indeterminate-by-paper"
    return H2aChainVerdict(n, n0, samples, bool(ok_random), bool(ok_sol), worst, nb, bool(observed))


# ---------------------------------------------------------------------------
# convergence study


@dataclass(frozen=True)
class StudySchedule:
    ns: tuple = DEFAULT_SCHEDULE
    oracle: str = "closed-form"  # or "fine-grid"
    oracle_name: str = "affine"
    n_ref: Optional[int] = None
    config: NewtonConfig = NewtonConfig()

    def __post_init__(self):
        ns = tuple(int(v) for v in self.ns)
        object.__setattr__(self, "ns", ns)
        if not ns or any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("schedule must be non-empty and strictly increasing")
        if ns[0] < 2:
            raise ValueError("schedule entries must be >= 2")
        if self.oracle not in ("closed-form", "fine-grid"):
            raise ValueError(f"unknown oracle kind {self.oracle!r}")
        if self.oracle == "fine-grid":
            n_ref = self.resolved_n_ref
            if n_ref < 64 * ns[-1]:
                raise ValueError(f"n_ref={n_ref} must be >= 64 * {ns[-1]}")
            bad = [n for n in ns if n_ref % n]
            if bad:
                raise ValueError(f"n_ref={n_ref} is not a multiple of {bad}")

    @property
    def resolved_n_ref(self) -> int:
        if self.n_ref is not None:
            return int(self.n_ref)
        need = max(2**12, 64 * self.ns[-1])
        return 1 << (need - 1).bit_length()


@dataclass
class StudyRow:
    n: int
    e_n: float
    Q_n: float
    N_n: float
    norm_E: float
    iterations: int


@dataclass
class ConvergenceReport:
    rows: list
    rate: float
    r2: float
    verdicts: dict
    c: float
    oracle: str
    label: str
    reports: list = field(default_factory=list, repr=False)

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        for r in self.rows:
            buf.write(
                f"{r.n},{r.e_n:.17g},{r.Q_n:.17g},{r.N_n:.17g},{r.norm_E:.17g},{r.iterations}\n"
            )
        buf.write(f"# rate={self.rate:.17g}\n")
        buf.write(f"# r2={self.r2:.17g}\n")
        for name, value in self.verdicts.items():
            buf.write(f"# verdict.{name}={_verdict_str(value)}\n")
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "oracle": self.oracle,
            "c": self.c,
            "rows": [asdict(r) for r in self.rows],
            "rate": self.rate,
            "r2": self.r2,
            "verdicts": {k: _verdict_str(v) for k, v in self.verdicts.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _verdict_str(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return str(v)


def fit_rate(ns, errors):
    """Negated least-squares slope of log e against log n, and R².

    Only the last max(4, ceil(len/2)) points enter the fit.
    """
    ns = np.asarray(ns, dtype=float)
    errors = np.asarray(errors, dtype=float)
    k = min(len(ns), max(4, math.ceil(len(ns) / 2)))
    if k < 2 or np.any(errors[-k:] <= 0):
        return math.nan, math.nan
    lx, ly = np.log(ns[-k:]), np.log(errors[-k:])
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(-slope), r2


def final_quartile_start(length: int) -> int:
    return length - max(1, math.ceil(length / 4))


def stabilized(values, rel: float = 0.05) -> bool:
    """Max attained before the final quartile, or spread < rel over it."""
    values = np.asarray(values, dtype=float)
    start = final_quartile_start(len(values))
    if int(np.argmax(values)) < start:
        return True
    tail = values[start:]
    top = float(np.max(np.abs(tail)))
    return top == 0.0 or (float(tail.max() - tail.min()) / top) < rel


def strictly_decreasing_tail(values, count: int = 4) -> bool:
    tail = np.asarray(values, dtype=float)[-count:]
    return len(tail) >= 2 and bool(np.all(np.diff(tail) < 0))


def build_oracle(nl: Nonlinearity, s: StudySchedule) -> Oracle:
    if s.oracle == "closed-form":
        return closed_form(s.oracle_name)
    return fine_grid_reference(DiscreteBVP(2, nl), s.resolved_n_ref, s.config)


class StudyError(Exception):
    def __init__(self, n, cause):
        super().__init__(f"solve failed at n={n}: {cause}")
        self.n = n
        self.cause = cause


def run_convergence_study(
    nl: Nonlinearity,
    s: StudySchedule | None = None,
    oracle: Optional[Oracle] = None,
    override_assumptions: bool = False,
    workers: Optional[int] = None,
) -> ConvergenceReport:
    s = s or StudySchedule()
    oracle = oracle or build_oracle(nl, s)

    def solve(n):
        try:
            return newton_solve(DiscreteBVP(n, nl), s.config, override_assumptions=override_assumptions)
        except SolverError as err:
            raise StudyError(n, err) from err

    if not override_assumptions:
        # check once up front instead of racing in the workers
        nl.h1, nl.h2
    with ThreadPoolExecutor(max_workers=workers or worker_count()) as pool:
        reports = list(pool.map(solve, s.ns))

    rows = []
    for n, r in zip(s.ns, reports):
        e_n = float(np.max(np.abs(r.solution.values - oracle.sample(n))))
        rows.append(
            StudyRow(n, e_n, r.max_scaled_slope, r.max_abs_value, r.norm_E_value, r.iterations)
        )
    errors = [row.e_n for row in rows]
    rate, r2 = fit_rate(s.ns, errors)
    c = nl.c
    verdicts = {
        "ewa1_bounded": stabilized([r.Q_n for r in rows]) and stabilized([r.N_n for r in rows]),
        "ewa2_converging": strictly_decreasing_tail(errors),
        "paper_N_bound": all(
            verify_theorem3_bounds(r, c)["N_bound"].holds for r in reports
        ),
        "paper_norm_bound": all(
            verify_theorem3_bounds(r, c)["norm_bound"].holds for r in reports
        ),
    }
    return ConvergenceReport(rows, rate, r2, verdicts, c, oracle.name, nl.label, reports)


# ---------------------------------------------------------------------------
# linear three-case examples


EXAMPLE1_CASES = (
    ("case1", lambda n: math.pi**2 / n**2, 0.0, 0.0, "unique-zero"),
    ("case2", lambda n: math.pi**2 / (4 * n**2), 0.0, 1.0, "unique"),
    ("case3", lambda n: 4 * math.sin(math.pi / (2 * n)) ** 2, 0.0, 0.1, "no-solution"),
)


@dataclass
class SpuriousDemo:
    cases: list
    lambda_table: list
    case1_gap: list

    @property
    def all_match(self) -> bool:
        return all(row["matches"] for row in self.cases) and all(
            row["between"] for row in self.case1_gap
        )

    def to_dict(self) -> dict:
        return {
            "all_match": self.all_match,
            "cases": self.cases,
            "case1_gap": self.case1_gap,
            "lambda_table": self.lambda_table,
        }


def spurious_demo(ns=(4, 10, 50), thresholds=(0.5, 0.99)) -> SpuriousDemo:
    cases = []
    for n in ns:
        for name, lam_of, alpha, beta, expected in EXAMPLE1_CASES:
            rep = linear_bvp_solve(n, lam_of(n), alpha, beta)
            cases.append(
                {
                    "case": name,
                    "n": n,
                    "lambda": lam_of(n),
                    "alpha": alpha,
                    "beta": beta,
                    "outcome": rep.outcome,
                    "expected": expected,
                    "matches": rep.outcome == expected,
                }
            )
    # pi²/n² sits strictly between the two lowest eigenvalues of the
    # (n-1)-node interior Laplacian, so case 1 is nonsingular
    gap = []
    for n in ns:
        l1 = 4 * math.sin(math.pi / (2 * n)) ** 2
        l2 = 4 * math.sin(math.pi / n) ** 2
        lam = math.pi**2 / n**2
        gap.append({"n": n, "lambda_1": l1, "lambda_2": l2, "lambda": lam, "between": l1 < lam < l2})
    table = []
    for n in ns:
        row = {"n": n, "lambda1": lambda1(n)}
        for a in thresholds:
            row[f"a={a}:a/pi"] = a / math.pi
            row[f"a={a}:lambda1>=a/pi"] = lambda1(n) >= a / math.pi
        table.append(row)
    return SpuriousDemo(cases, table, gap)

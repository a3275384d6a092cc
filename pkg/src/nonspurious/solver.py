"""Discrete energy, its derivatives, and the minimiser.

The discrete problem

    Δ²x(k-1) = f(k/n, x(k)) / n²,   k = 1..n-1,   x(0) = x(n) = 0

is the Euler-Lagrange equation of

    I(x) = Σ_{k=1..n} ½ |Δx(k-1)|² + (1/n²) Σ_{k=1..n-1} F(k/n, x(k)).

Under H2 the Hessian of I is the discrete Laplacian plus a nonnegative
diagonal, so it is symmetric positive definite and tridiagonal.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import expr as ex
from .grid import GridFunction, max_norm, max_scaled_slope, norm_E
from .nonlinearity import Nonlinearity

log = logging.getLogger(__name__)

SINGULAR_RTOL = 1e-13


class SolverError(Exception):
    pass


class SingularSystemError(SolverError):
    def __init__(self, message, pivot_index=None, report=None):
        super().__init__(message)
        self.pivot_index = pivot_index
        self.report = report


class ConvergenceError(SolverError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class AssumptionError(SolverError):
    def __init__(self, verdict):
        super().__init__(
            f"{verdict.hypothesis} fails (witness {verdict.witness}); "
            "pass override_assumptions=True to solve anyway"
        )
        self.verdict = verdict


@dataclass(frozen=True)
class DiscreteBVP:
    n: int
    nl: Nonlinearity

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need n >= 2, got {self.n}")

    @property
    def t_interior(self) -> np.ndarray:
        return np.arange(1, self.n) / self.n


@dataclass(frozen=True)
class NewtonConfig:
    residual_tol: float = 1e-12
    max_iter: int = 50
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    derivative_mode: str = "symbolic"
    method: str = "newton"  # or "gradient": Armijo descent along the E-norm gradient
    min_step: float = 1e-12

    def __post_init__(self):
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must lie in (0, 1)")
        if self.derivative_mode not in ("symbolic", "finite-difference"):
            raise ValueError(f"unknown derivative mode {self.derivative_mode!r}")
        if self.method not in ("newton", "gradient"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class SolveReport:
    solution: GridFunction
    iterations: int
    final_residual: float
    energy: float
    norm_E_value: float
    max_abs_value: float
    max_scaled_slope: float
    status: str
    energy_history: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.solution.n

    def to_dict(self, include_solution: bool = False) -> dict:
        out = {
            "n": self.n,
            "status": self.status,
            "iterations": self.iterations,
            "residual": self.final_residual,
            "energy": self.energy,
            "norm_E": self.norm_E_value,
            "N_n": self.max_abs_value,
            "Q_n": self.max_scaled_slope,
        }
        if include_solution:
            out["solution"] = [float(v) for v in self.solution.values]
        return out


# ---------------------------------------------------------------------------
# energy and derivatives, on interior arrays


def _check_n(p, x):
    if x.n != p.n:
        raise ValueError(f"grid function has n={x.n}, problem has n={p.n}")


def _energy(p: DiscreteBVP, u: np.ndarray) -> float:
    full = np.concatenate(([0.0], u, [0.0]))
    quad = 0.5 * float(np.sum(np.diff(full) ** 2))
    return quad + float(np.sum(p.nl.F(p.t_interior, u))) / p.n**2


def _gradient(p: DiscreteBVP, u: np.ndarray) -> np.ndarray:
    full = np.concatenate(([0.0], u, [0.0]))
    lap = full[2:] - 2.0 * full[1:-1] + full[:-2]
    return -lap + p.nl.f(p.t_interior, u) / p.n**2


def _hessian_diag(p: DiscreteBVP, u: np.ndarray, mode: str = "symbolic") -> np.ndarray:
    t = p.t_interior
    if mode == "finite-difference" or p.nl.fx_expr is None:
        fx = ex.central_difference(p.nl.f_expr, t, u)
    else:
        fx = p.nl.fx(t, u)
    if not np.all(np.isfinite(fx)):
        raise ex.DomainError(p.nl.f_expr, "non-finite derivative")
    return 2.0 + fx / p.n**2


def energy(p: DiscreteBVP, x: GridFunction) -> float:
    _check_n(p, x)
    return _energy(p, x.interior)


def gradient(p: DiscreteBVP, x: GridFunction) -> GridFunction:
    """Gradient of I; component j is -Δ²x(j-1) + f(j/n, x(j)) / n²."""
    _check_n(p, x)
    return GridFunction.from_interior(_gradient(p, x.interior))


class Tridiagonal(NamedTuple):
    """Symmetric tridiagonal matrix with constant off-diagonal."""

    diag: np.ndarray
    off: float = -1.0

    def matvec(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = self.diag * v
        out[1:] += self.off * v[:-1]
        out[:-1] += self.off * v[1:]
        return out

    def dense(self) -> np.ndarray:
        m = len(self.diag)
        return np.diag(self.diag) + self.off * (np.eye(m, k=1) + np.eye(m, k=-1))


def hessian_tridiag(p: DiscreteBVP, x: GridFunction, mode: str = "symbolic") -> Tridiagonal:
    _check_n(p, x)
    return Tridiagonal(_hessian_diag(p, x.interior, mode))


# ---------------------------------------------------------------------------
# tridiagonal solve


class ThomasResult(NamedTuple):
    x: np.ndarray
    pivots: np.ndarray
    min_abs_pivot: float


def elimination_pivots(d, off=-1.0) -> np.ndarray:
    """Pivots of Gaussian elimination without pivoting."""
    d = [float(v) for v in d]
    e2 = off * off
    piv = [0.0] * len(d)
    prev = d[0]
    piv[0] = prev
    for i in range(1, len(d)):
        prev = d[i] - e2 / prev if prev != 0.0 else -math.inf
        piv[i] = prev
    return np.array(piv)


def thomas_solve(d, rhs, off: float = -1.0) -> ThomasResult:
    """Solve the symmetric tridiagonal system (diag d, off-diagonal ``off``).

    Raises SingularSystemError when a pivot falls below
    1e-13 * max|d| in magnitude.
    """
    d = [float(v) for v in d]
    r = [float(v) for v in rhs]
    m = len(d)
    if len(r) != m:
        raise ValueError("diagonal and right-hand side differ in length")
    thresh = SINGULAR_RTOL * max(abs(v) for v in d)
    piv = [0.0] * m
    y = [0.0] * m
    prev_p, prev_y = 0.0, 0.0
    for i in range(m):
        if i == 0:
            p, yi = d[0], r[0]
        else:
            ell = off / prev_p
            p = d[i] - ell * off
            yi = r[i] - ell * prev_y
        if abs(p) < thresh or p == 0.0:
            raise SingularSystemError(
                f"singular tridiagonal matrix: pivot {p:.3e} at index {i}", pivot_index=i
            )
        piv[i] = p
        y[i] = yi
        prev_p, prev_y = p, yi
    sol = [0.0] * m
    nxt = 0.0
    for i in range(m - 1, -1, -1):
        nxt = (y[i] - off * nxt) / piv[i] if i < m - 1 else y[i] / piv[i]
        sol[i] = nxt
    piv = np.array(piv)
    return ThomasResult(np.array(sol), piv, float(np.min(np.abs(piv))))


# ---------------------------------------------------------------------------
# minimisation


def _make_report(p, u, iterations, residual, status, history):
    x = GridFunction.from_interior(u)
    return SolveReport(
        solution=x,
        iterations=iterations,
        final_residual=residual,
        energy=_energy(p, u),
        norm_E_value=norm_E(x),
        max_abs_value=max_norm(x),
        max_scaled_slope=max_scaled_slope(x),
        status=status,
        energy_history=history,
    )


def _safe_energy(p, u):
    try:
        val = _energy(p, u)
    except ex.DomainError:
        return math.inf
    return val if math.isfinite(val) else math.inf


def _laplacian_solve(g):
    # Riesz representative of g in the E inner product
    return thomas_solve(np.full(len(g), 2.0), g).x


def newton_solve(
    p: DiscreteBVP,
    cfg: NewtonConfig | None = None,
    x0: Optional[GridFunction] = None,
    override_assumptions: bool = False,
) -> SolveReport:
    """Minimise I by damped Newton with Armijo backtracking.

    Raises AssumptionError if H1 or H2 fail (unless overridden),
    SingularSystemError if a Hessian is not positive definite, and
    ConvergenceError after ``max_iter`` iterations.
    """
    cfg = cfg or NewtonConfig()
    if not override_assumptions:
        for verdict in (p.nl.h1, p.nl.h2):
            if not verdict.passed:
                raise AssumptionError(verdict)
    if x0 is None:
        u = np.zeros(p.n - 1)
    else:
        _check_n(p, x0)
        u = x0.interior.copy()

    mode = cfg.derivative_mode if p.nl.fx_expr is not None else "finite-difference"
    val = _energy(p, u)
    g = _gradient(p, u)
    res = float(np.max(np.abs(g)))
    history = [val]
    it = 0
    while res > cfg.residual_tol:
        if it >= cfg.max_iter:
            rep = _make_report(p, u, it, res, "no-convergence", history)
            raise ConvergenceError(
                f"no convergence after {it} iterations (residual {res:.3e})", rep
            )
        if cfg.method == "newton":
            diag = _hessian_diag(p, u, mode)
            try:
                sol = thomas_solve(diag, -g)
            except SingularSystemError as err:
                rep = _make_report(p, u, it, res, "singular", history)
                raise SingularSystemError(str(err), err.pivot_index, rep) from None
            if np.any(sol.pivots <= 0):
                i = int(np.flatnonzero(sol.pivots <= 0)[0])
                rep = _make_report(p, u, it, res, "singular", history)
                raise SingularSystemError(
                    f"Hessian not positive definite: pivot {sol.pivots[i]:.3e} at index {i}",
                    i,
                    rep,
                )
            step = sol.x
        else:
            step = -_laplacian_solve(g)

        slope = float(g @ step)
        alpha = 1.0
        while True:
            trial = u + alpha * step
            tval = _safe_energy(p, trial)
            if tval <= val + cfg.armijo_c * alpha * slope:
                break
            # near the optimum the decrease drops below the rounding level of I;
            # accept the step if it still reduces the gradient
            if abs(cfg.armijo_c * alpha * slope) <= 64 * np.finfo(float).eps * (1 + abs(val)):
                tg = _gradient(p, trial)
                if np.max(np.abs(tg)) < res:
                    break
            alpha *= cfg.backtrack_factor
            if alpha < cfg.min_step:
                rep = _make_report(p, u, it, res, "no-convergence", history)
                raise ConvergenceError("line search failed to find a decrease", rep)
        u = trial
        val = tval if math.isfinite(tval) else _energy(p, u)
        g = _gradient(p, u)
        res = float(np.max(np.abs(g)))
        history.append(val)
        it += 1
        log.debug("n=%d iter=%d alpha=%g residual=%.3e energy=%.17g", p.n, it, alpha, res, val)

    return _make_report(p, u, it, res, "converged", history)


# ---------------------------------------------------------------------------
# linear problems Δ²x + lam x = 0 with inhomogeneous Dirichlet data


@dataclass
class LinearSolveReport:
    n: int
    lam: float
    alpha: float
    beta: float
    status: str  # "unique" | "singular"
    consistency: Optional[str] = None  # "no-solution" | "infinitely-many" when singular
    values: Optional[np.ndarray] = None  # x(0..n), when unique
    min_abs_pivot: float = math.nan
    pivot_index: Optional[int] = None

    @property
    def outcome(self) -> str:
        if self.status == "singular":
            return self.consistency
        if np.max(np.abs(self.values)) == 0.0:
            return "unique-zero"
        return "unique"

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "lambda": self.lam,
            "alpha": self.alpha,
            "beta": self.beta,
            "status": self.status,
            "consistency": self.consistency,
            "outcome": self.outcome,
            "min_abs_pivot": self.min_abs_pivot,
            "values": None if self.values is None else [float(v) for v in self.values],
        }


def linear_bvp_solve(n: int, lam: float, alpha: float, beta: float) -> LinearSolveReport:
    """Solve x(k+1) - 2x(k) + x(k-1) + lam x(k) = 0, k = 1..n-1.

    Either index convention of the second difference gives this interior
    system.  Singular systems get a consistency verdict from the null
    vector of the recurrence.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    m = n - 1
    d = np.full(m, 2.0 - lam)
    rhs = np.zeros(m)
    rhs[0] += alpha
    rhs[-1] += beta
    try:
        sol = thomas_solve(d, rhs)
    except SingularSystemError as err:
        # null vector: v0 = 0, v1 = 1, v_{k+1} = (2 - lam) v_k - v_{k-1}
        v = np.zeros(m + 1)
        v[1] = 1.0
        for k in range(1, m):
            v[k + 1] = (2.0 - lam) * v[k] - v[k - 1]
        null = v[1:]
        overlap = abs(float(rhs @ null))
        scale = float(np.linalg.norm(rhs) * np.linalg.norm(null))
        consistent = overlap <= 1e-10 * scale if scale > 0 else True
        return LinearSolveReport(
            n,
            lam,
            alpha,
            beta,
            "singular",
            "infinitely-many" if consistent else "no-solution",
            pivot_index=err.pivot_index,
            min_abs_pivot=0.0,
        )
    values = np.concatenate(([alpha], sol.x, [beta]))
    return LinearSolveReport(n, lam, alpha, beta, "unique", None, values, sol.min_abs_pivot)

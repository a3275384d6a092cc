"""The right-hand side f(t, x), its x-derivative and antiderivative F.

Also hosts the sampled checks of the standing hypotheses:

* H1   f(t, 0) != 0 on [0, 1]
* H2   x -> f(t, x) nondecreasing
* H2a  f(t, x) <= a + b |x|^gamma with gamma in [0, 1)
* relaxed convexity of x -> F(t, x) + (a / 2 pi) x^2
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from . import expr as ex

H1_TOL = 1e-12
MONOTONE_TOL = 1e-9
H2A_TOL = 1e-9
CONVEXITY_TOL = 1e-8
CONVEXITY_STEP = 1e-3
QUAD_ATOL = 1e-12
C_SAMPLES = 10_001


class BuildError(Exception):
    pass


class QuadratureError(BuildError):
    pass


@dataclass(frozen=True)
class SamplingConfig:
    xrange: float = 100.0
    tsamples: int = 201
    xsamples: int = 401

    def grid(self):
        t = np.linspace(0.0, 1.0, self.tsamples)
        x = np.linspace(-self.xrange, self.xrange, self.xsamples)
        return np.meshgrid(t, x, indexing="ij")


@dataclass(frozen=True)
class AssumptionVerdict:
    hypothesis: str
    passed: bool
    witness: Optional[tuple] = None
    samples: int = 0
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.passed and self.witness is None:
            raise ValueError("a failing verdict needs a witness")


# ---------------------------------------------------------------------------
# quadrature

_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


def _gauss_legendre(func, t, a, b):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    s = mid[:, None] + half[:, None] * _GL_X[None, :]
    vals = func(np.broadcast_to(t[:, None], s.shape), s)
    return half * (vals @ _GL_W)


def adaptive_gauss_legendre(func, t, a, b, atol=QUAD_ATOL, max_depth=60):
    """Integrate s -> func(t, s) over [a, b], vectorised over the arrays t, a, b.

    Panels are bisected until the two-panel and one-panel rules agree to
    ``atol`` (shrunk by sqrt(2) per level) or to 1e-14 relative.
    """
    t, a, b = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (t, a, b))
    t, a, b = np.broadcast_arrays(t, a, b)
    shape = t.shape
    t, a, b = t.ravel(), a.ravel(), b.ravel()
    out = np.zeros(t.size)
    idx = np.arange(t.size)
    tol = np.full(t.size, float(atol))
    whole = _gauss_legendre(func, t, a, b)
    for _ in range(max_depth):
        if idx.size == 0:
            return out.reshape(shape)
        m = 0.5 * (a + b)
        left = _gauss_legendre(func, t, a, m)
        right = _gauss_legendre(func, t, m, b)
        refined = left + right
        ok = np.abs(refined - whole) <= np.maximum(tol, 1e-14 * np.abs(refined))
        np.add.at(out, idx[ok], refined[ok])
        bad = ~ok
        idx = np.concatenate((idx[bad], idx[bad]))
        t = np.concatenate((t[bad], t[bad]))
        a, b = np.concatenate((a[bad], m[bad])), np.concatenate((m[bad], b[bad]))
        tol = np.concatenate((tol[bad], tol[bad])) / math.sqrt(2.0)
        whole = np.concatenate((left[bad], right[bad]))
    if idx.size:
        raise QuadratureError(f"quadrature did not converge at {idx.size} panels")
    return out.reshape(shape)


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    f_expr: ex.Expr
    fx_expr: Optional[ex.Expr]
    F_expr: Optional[ex.Expr]
    c: float
    h2a: Optional[tuple] = None
    label: str = "custom"
    sampling: SamplingConfig = SamplingConfig()

    @property
    def derivative_mode(self) -> str:
        return "symbolic" if self.fx_expr is not None else "finite-difference"

    def f(self, t, x):
        return ex.evaluate(self.f_expr, t, x)

    def fx(self, t, x):
        if self.fx_expr is not None:
            return ex.evaluate(self.fx_expr, t, x)
        return ex.central_difference(self.f_expr, t, x)

    def F(self, t, x):
        if self.F_expr is not None:
            return ex.evaluate(self.F_expr, t, x)
        scalar = np.ndim(t) == 0 and np.ndim(x) == 0
        t, x = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
        val = adaptive_gauss_legendre(self.f, t, np.zeros_like(x), x)
        return float(val.reshape(-1)[0]) if scalar else val.reshape(t.shape)

    @cached_property
    def h1(self) -> AssumptionVerdict:
        return check_H1(self)

    @cached_property
    def h2(self) -> AssumptionVerdict:
        return check_H2(self)

    @property
    def monotone(self) -> bool:
        return self.h2.passed

    def describe(self) -> dict:
        return {
            "label": self.label,
            "f": ex.to_string(self.f_expr),
            "F": None if self.F_expr is None else ex.to_string(self.F_expr),
            "derivative_mode": self.derivative_mode,
            "c": self.c,
            "h2a": None if self.h2a is None else list(self.h2a),
        }


def _max_abs_f0(f_expr):
    t = np.linspace(0.0, 1.0, C_SAMPLES)
    vals = np.abs(ex.evaluate(f_expr, t, 0.0))
    i = int(np.argmax(vals))
    lo, hi = t[max(i - 1, 0)], t[min(i + 1, C_SAMPLES - 1)]
    res = minimize_scalar(
        lambda s: -abs(ex.evaluate(f_expr, s, 0.0)),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return max(float(vals[i]), float(-res.fun))


def build(
    f_expr,
    F_expr=None,
    h2a=None,
    *,
    derivative_mode: str = "auto",
    label: str = "custom",
    sampling: SamplingConfig | None = None,
) -> Nonlinearity:
    """Assemble a Nonlinearity from expressions (or expression strings).

    ``derivative_mode`` is "symbolic", "finite-difference" or "auto"
    (symbolic unless the expression uses abs).
    """
    if isinstance(f_expr, str):
        f_expr = ex.parse(f_expr)
    if isinstance(F_expr, str):
        F_expr = ex.parse(F_expr)
    if derivative_mode not in ("auto", "symbolic", "finite-difference"):
        raise ValueError(f"unknown derivative mode {derivative_mode!r}")
    fx_expr = None
    if derivative_mode != "finite-difference":
        try:
            fx_expr = ex.diff_x(f_expr)
        except ex.NonDifferentiableError:
            if derivative_mode == "symbolic":
                raise
    if h2a is not None:
        a, b, gamma = (float(v) for v in h2a)
        if not (a > 0 and b > 0 and 0 <= gamma < 1):
            raise ValueError("H2a constants need a > 0, b > 0, 0 <= gamma < 1")
        h2a = (a, b, gamma)
    try:
        c = _max_abs_f0(f_expr)
    except ex.DomainError as err:
        raise BuildError(f"f is not finite on the sampling grid: {err}") from err
    return Nonlinearity(
        f_expr=f_expr,
        fx_expr=fx_expr,
        F_expr=F_expr,
        c=c,
        h2a=h2a,
        label=label,
        sampling=sampling or SamplingConfig(),
    )


# ---------------------------------------------------------------------------
# hypothesis checks


def _worst_failure(violation, mask, *coords):
    """Coordinates of the largest violation among failing samples, or None."""
    if not np.any(mask):
        return None
    i = int(np.argmax(np.where(mask, violation, -np.inf).ravel()))
    return tuple(float(np.ravel(c)[i]) for c in coords)


def check_H1(nl: Nonlinearity) -> AssumptionVerdict:
    t = np.linspace(0.0, 1.0, C_SAMPLES)
    vals = np.abs(nl.f(t, np.zeros_like(t)))
    witness = _worst_failure(-vals, vals <= H1_TOL, t)
    return AssumptionVerdict(
        "H1", witness is None, witness, t.size, {"c": nl.c, "min_abs_f0": float(vals.min())}
    )


def check_H2(nl: Nonlinearity, sampling: SamplingConfig | None = None) -> AssumptionVerdict:
    T, X = (sampling or nl.sampling).grid()
    d = nl.fx(T, X)
    witness = _worst_failure(-d, d < -MONOTONE_TOL, T, X)
    return AssumptionVerdict("H2", witness is None, witness, T.size, {"min_fx": float(d.min())})


def check_H2a(nl: Nonlinearity, sampling: SamplingConfig | None = None) -> AssumptionVerdict:
    if nl.h2a is None:
        raise ValueError("nonlinearity carries no H2a constants")
    a, b, gamma = nl.h2a
    T, X = (sampling or nl.sampling).grid()
    excess = nl.f(T, X) - (a + b * np.abs(X) ** gamma)
    witness = _worst_failure(excess, excess > H2A_TOL, T, X)
    return AssumptionVerdict(
        "H2a", witness is None, witness, T.size, {"max_excess": float(excess.max())}
    )


def check_relaxed_convexity(
    nl: Nonlinearity, a: float, sampling: SamplingConfig | None = None
) -> AssumptionVerdict:
    """Second difference of x -> F(t,x) + (a/2pi) x^2 must be >= -1e-8.

    The threshold is widened by the rounding (and, for quadrature F, the
    integration) error of the three F values divided by h^2.
    """
    if not 0 < a < 1:
        raise ValueError("a must lie in (0, 1)")
    T, X = (sampling or nl.sampling).grid()
    h = CONVEXITY_STEP
    k = a / (2.0 * math.pi)

    def G(x):
        return nl.F(T, x) + k * x**2

    gm, g0, gp = G(X - h), G(X), G(X + h)
    second = (gp - 2.0 * g0 + gm) / h**2
    noise = 4.0 * np.finfo(float).eps * (np.abs(gm) + 2 * np.abs(g0) + np.abs(gp))
    if nl.F_expr is None:
        noise = noise + 4.0 * QUAD_ATOL
    slack = CONVEXITY_TOL + noise / h**2
    witness = _worst_failure(-second - slack, second < -slack, T, X)
    return AssumptionVerdict(
        "RelaxedConvexity",
        witness is None,
        witness,
        T.size,
        {"a": a, "min_second_difference": float(second.min())},
    )


# ---------------------------------------------------------------------------
# catalogue


@dataclass(frozen=True)
class CatalogueEntry:
    f: str
    F: Optional[str] = None
    h2a: Optional[tuple] = None
    derivative_mode: str = "auto"
    note: str = ""


CATALOGUE = {
    "affine": CatalogueEntry("x + 1", "x^2/2 + x", note="closed-form oracle available"),
    "exp": CatalogueEntry(
        "(1 + t^2)*exp(x - t^2)",
        "(1 + t^2)*(exp(x - t^2) - exp(-t^2))",
        note="g(t) exp(x - t^2) with g = 1 + t^2",
    ),
    "atan": CatalogueEntry(
        "(1 + t^2)*atan(x)",
        "(1 + t^2)*(x*atan(x) - log(1 + x^2)/2)",
        note="g(t) atan(x); f(t,0) = 0 so H1 fails and the solution is zero",
    ),
    "cubic": CatalogueEntry(
        "(1 + t^2)*x^3 + exp(x - t^2)",
        "(1 + t^2)*x^4/4 + exp(x - t^2) - exp(-t^2)",
        note="g(t) x^3 + exp(x - t^2) with g = 1 + t^2",
    ),
    "atan-shift": CatalogueEntry(
        "atan(x) + 1",
        "x*atan(x) - log(1 + x^2)/2 + x",
        h2a=(1.0 + math.pi / 2.0, 1.0, 0.0),
        note="bounded, monotone; H2a with gamma = 0",
    ),
    "sqrt": CatalogueEntry(
        "sqrt(abs(x)) + 1",
        None,
        h2a=(1.0, 1.0, 0.5),
        derivative_mode="finite-difference",
        note="sublinear; not monotone for x < 0",
    ),
}


def from_catalogue(name: str, sampling: SamplingConfig | None = None) -> Nonlinearity:
    try:
        entry = CATALOGUE[name]
    except KeyError:
        raise KeyError(f"unknown catalogue entry {name!r}; have {sorted(CATALOGUE)}") from None
    return build(
        entry.f,
        entry.F,
        entry.h2a,
        derivative_mode=entry.derivative_mode,
        label=name,
        sampling=sampling,
    )


def linear_family(lam: float, n: int) -> Nonlinearity:
    """f(t, x) = -lam n^2 x, so the discrete problem reads Δ²x + lam x = 0.

    Violates H1 (f(t,0) = 0); only meaningful for the linear solver path.
    """
    coef = lam * n * n
    f = ex.Neg(ex.BinOp("*", ex.Const(coef), ex.Var("x")))
    F = ex.Neg(ex.BinOp("*", ex.Const(coef / 2.0), ex.BinOp("^", ex.Var("x"), ex.Const(2.0))))
    return Nonlinearity(f, ex.diff_x(f), F, 0.0, None, f"linear(lambda={lam!r}, n={n})")


# ---------------------------------------------------------------------------
# config files

CONFIG_KEYS = ("f", "F", "a", "b", "gamma", "xrange", "tsamples", "xsamples")


def parse_config(text: str) -> dict:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        if key in ("a", "b", "gamma", "xrange"):
            out[key] = float(value)
        elif key in ("tsamples", "xsamples"):
            out[key] = int(value)
        else:
            out[key] = value
    return out


def load_config(path) -> dict:
    return parse_config(Path(path).read_text(encoding="utf-8"))

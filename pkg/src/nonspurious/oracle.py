"""Reference values of the continuous solution x(t)."""
from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .solver import DiscreteBVP, NewtonConfig, newton_solve

ODE_RESIDUAL_TOL = 1e-8
ODE_CHECK_POINTS = 1001


class OracleError(Exception):
    pass


@dataclass(frozen=True, eq=False)
class Oracle:
    kind: str  # "closed-form" | "fine-grid"
    name: str
    evaluator: Callable
    note: str = ""
    n_ref: Optional[int] = None
    domain: tuple = (0.0, 1.0)

    def __call__(self, t):
        return self.evaluator(np.asarray(t, dtype=float))

    def sample(self, n: int) -> np.ndarray:
        """Values at the nodes k/n (scaled to the domain), k = 0..n."""
        lo, hi = self.domain
        return self(lo + (hi - lo) * np.arange(n + 1) / n)

    def to_csv(self, t=None) -> str:
        if t is None:
            t = np.linspace(*self.domain, ODE_CHECK_POINTS)
        buf = io.StringIO()
        buf.write("t,value\n")
        for ti, v in zip(t, self(t)):
            buf.write(f"{ti:.17g},{v:.17g}\n")
        return buf.getvalue()


def _second_derivative(func, t, h):
    # five-point stencil, O(h^4)
    return (
        -func(t + 2 * h) + 16 * func(t + h) - 30 * func(t) + 16 * func(t - h) - func(t - 2 * h)
    ) / (12 * h * h)


def ode_residual(func, rhs, domain=(0.0, 1.0), points=ODE_CHECK_POINTS, h=1e-3) -> float:
    """max |x'' - rhs(t, x)| over sampled t, x'' by central differences."""
    t = np.linspace(*domain, points)
    return float(np.max(np.abs(_second_derivative(func, t, h) - rhs(t, func(t)))))


def _affine(t):
    return np.cosh(t - 0.5) / np.cosh(0.5) - 1.0


def _example1_case2(n):
    w = math.pi / (2 * n)

    def x(s):
        return np.sin(w * s)

    rhs = lambda s, v: -(w * w) * v  # noqa: E731
    return x, rhs


CLOSED_FORMS = ("affine", "example1-case2")


def closed_form(name: str, n: Optional[int] = None) -> Oracle:
    """Closed-form continuous solutions.

    ``affine``: x'' = x + 1 on [0, 1].  ``example1-case2``: x'' + (pi²/4n²) x = 0,
    x(0) = 0, x(n) = 1 on [0, n] (needs ``n``).
    """
    if name == "affine":
        func, rhs, domain = _affine, (lambda t, v: v + 1.0), (0.0, 1.0)
        note = "x(t) = cosh(t - 1/2)/cosh(1/2) - 1 solves x'' = x + 1"
    elif name == "example1-case2":
        if n is None:
            raise OracleError("example1-case2 needs n")
        func, rhs = _example1_case2(n)
        domain = (0.0, float(n))
        note = f"x(t) = sin(pi t / (2n)), n={n}"
    else:
        raise OracleError(f"unknown closed form {name!r}; have {CLOSED_FORMS}")
    res = ode_residual(func, rhs, domain)
    if res > ODE_RESIDUAL_TOL:
        raise OracleError(f"closed form {name} fails its ODE: residual {res:.3e}")
    return Oracle("closed-form", name, func, note, domain=domain)


def fine_grid_reference(
    p: DiscreteBVP, n_ref: int, cfg: NewtonConfig | None = None, workers: int = 2
) -> Oracle:
    """Richardson-extrapolated reference from solves at n_ref and 2 n_ref.

    Assumes second-order accuracy of the scheme; values between nodes come
    from piecewise-linear interpolation.
    """
    if n_ref < 2**12 or n_ref & (n_ref - 1):
        raise OracleError(f"n_ref must be a power of two >= 4096, got {n_ref}")
    problems = [DiscreteBVP(n_ref, p.nl), DiscreteBVP(2 * n_ref, p.nl)]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        coarse, fine = pool.map(lambda q: newton_solve(q, cfg), problems)
    values = (4.0 * fine.solution.values[::2] - coarse.solution.values) / 3.0
    nodes = np.arange(n_ref + 1) / n_ref

    def evaluator(t):
        return np.interp(t, nodes, values)

    return Oracle(
        "fine-grid",
        f"{p.nl.label}@{n_ref}",
        evaluator,
        f"Richardson combination of n={n_ref} and n={2 * n_ref}",
        n_ref=n_ref,
    )

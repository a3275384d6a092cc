"""Grid functions on nodes 0..n vanishing at both ends, and their norms."""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values x(0), ..., x(n) with x(0) = x(n) = 0.

    ``values`` is copied and made read-only on construction.
    """

    n: int
    values: np.ndarray

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need n >= 2, got n={self.n}")
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.n + 1,):
            raise ValueError(f"expected {self.n + 1} values, got shape {vals.shape}")
        if vals[0] != 0.0 or vals[-1] != 0.0:
            raise ValueError("boundary values must be zero")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, n: int) -> "GridFunction":
        return cls(n, np.zeros(n + 1))

    @classmethod
    def from_interior(cls, interior) -> "GridFunction":
        interior = np.asarray(interior, dtype=float)
        return cls(len(interior) + 1, np.concatenate(([0.0], interior, [0.0])))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, scale: float = 1.0) -> "GridFunction":
        """Interior values i.i.d. uniform on [-scale, scale]."""
        return cls.from_interior(rng.uniform(-scale, scale, n - 1))

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1]

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n + 1) / self.n

    def __eq__(self, other):
        return (
            isinstance(other, GridFunction)
            and self.n == other.n
            and np.array_equal(self.values, other.values)
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("k,t,value\n")
        for k, v in enumerate(self.values):
            buf.write(f"{k},{k / self.n:.17g},{v:.17g}\n")
        return buf.getvalue()


def delta(x: GridFunction, k: int) -> float:
    """Forward difference x(k) - x(k-1), for k in 1..n."""
    if not 1 <= k <= x.n:
        raise IndexError(f"delta index {k} outside 1..{x.n}")
    return float(x.values[k] - x.values[k - 1])


def delta2(x: GridFunction, k: int) -> float:
    """Second difference x(k+1) - 2x(k) + x(k-1), for interior k in 1..n-1."""
    if not 1 <= k <= x.n - 1:
        raise IndexError(f"delta2 index {k} outside 1..{x.n - 1}")
    v = x.values
    return float(v[k + 1] - 2.0 * v[k] + v[k - 1])


def _rss(v: np.ndarray) -> float:
    # scaled so tiny or huge entries neither underflow nor overflow
    top = float(np.max(np.abs(v))) if v.size else 0.0
    if top == 0.0:
        return 0.0
    return top * float(np.sqrt(np.sum((v / top) ** 2)))


def norm_E(x: GridFunction) -> float:
    """Energy norm: root-sum-square of the n forward differences."""
    return _rss(np.diff(x.values))


def norm_0(x: GridFunction) -> float:
    return _rss(x.interior)


def max_norm(x: GridFunction) -> float:
    return float(np.max(np.abs(x.values)))


def max_scaled_slope(x: GridFunction) -> float:
    """max_k n |x(k) - x(k-1)|, a discrete sup of |x'|."""
    return float(x.n * np.max(np.abs(np.diff(x.values))))


# embedding constants for (1/2)|x|_E <= |x|_0 <= sqrt((n-1) n) |x|_E
def lower_embedding_constant(n: int) -> float:
    return 0.5


def upper_embedding_constant(n: int) -> float:
    return float(np.sqrt((n - 1) * n))


def max_norm_embedding_constant(n: int) -> float:
    return float(np.sqrt(n + 1) / 2.0)

import math

import numpy as np
import pytest

from nonspurious.nonlinearity import build, from_catalogue
from nonspurious.oracle import OracleError, closed_form, fine_grid_reference, ode_residual
from nonspurious.solver import DiscreteBVP


@pytest.fixture(scope="module")
def affine_fine():
    return fine_grid_reference(DiscreteBVP(2, from_catalogue("affine")), 2**14)


def test_affine_values():
    o = closed_form("affine")
    assert o(0.5) == pytest.approx(1 / math.cosh(0.5) - 1, abs=1e-15)
    assert o(0.5) == pytest.approx(-0.113181, abs=1e-6)
    assert o(0.0) == 0.0 and abs(o(1.0)) <= 1e-16


def test_affine_derivative_bound():
    o = closed_form("affine")
    t = np.linspace(0, 1, 10_001)
    h = 1e-5
    slope = np.max(np.abs(o(t + h) - o(t - h)) / (2 * h))
    assert slope == pytest.approx(math.tanh(0.5), abs=1e-9)
    assert math.tanh(0.5) == pytest.approx(0.462117, abs=1e-6)


def test_example1_case2_closed_form():
    o = closed_form("example1-case2", n=10)
    assert o.domain == (0.0, 10.0)
    assert o(10.0) == pytest.approx(1.0) and o(0.0) == 0.0
    s = o.sample(10)
    assert len(s) == 11 and s[-1] == pytest.approx(1.0)


def test_closed_form_errors():
    with pytest.raises(OracleError):
        closed_form("nope")
    with pytest.raises(OracleError):
        closed_form("example1-case2")


def test_ode_residual_rejects_wrong_solution():
    wrong = lambda t: np.sin(np.pi * t)  # noqa: E731
    assert ode_residual(wrong, lambda t, x: x + 1.0) > 1.0
    assert ode_residual(closed_form("affine"), lambda t, x: x + 1.0) <= 1e-8


def test_fine_grid_matches_closed_form(affine_fine):
    t = np.linspace(0, 1, 1001)
    assert np.max(np.abs(affine_fine(t) - closed_form("affine")(t))) <= 1e-8
    assert affine_fine(0.0) == 0.0


def test_fine_grid_nested_nodes_exact(affine_fine):
    # k/n for n | n_ref are stored nodes: interpolation returns them verbatim
    n = 256
    stored = affine_fine(np.arange(2**14 + 1) / 2**14)
    np.testing.assert_array_equal(affine_fine.sample(n), stored[:: 2**14 // n])


def test_fine_grid_symmetry_for_autonomous_f():
    o = fine_grid_reference(DiscreteBVP(2, build("exp(x)")), 2**12)
    t = np.linspace(0, 1, 1001)
    assert np.max(np.abs(o(t) - o(1 - t))) <= 1e-8


def test_fine_grid_validates_n_ref():
    p = DiscreteBVP(2, from_catalogue("affine"))
    for bad in (1000, 2048, 3 * 2**12):
        with pytest.raises(OracleError):
            fine_grid_reference(p, bad)


def test_oracle_csv():
    lines = closed_form("affine").to_csv(np.array([0.0, 0.5])).splitlines()
    assert lines[0] == "t,value"
    assert lines[1] == "0,0"
    assert float(lines[2].split(",")[1]) == 1 / math.cosh(0.5) - 1

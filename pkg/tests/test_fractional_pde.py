import math

import numpy as np
import pytest
from scipy.linalg import solve_banded

from subdiff.classical_pricing import MarketParams, bachelier_call, bs_call
from subdiff.errors import PdeInstabilityError
from subdiff.fractional_pde import (
    Coordinate,
    PdeGrid,
    l1_weights,
    solve_frac_bachelier_call,
    solve_frac_bs_call,
    thomas_solve,
)
from subdiff.sub_pricing import MCConfig, gap_bound_constant, price_european_closed
from subdiff.subordinator import LaplaceExponentSpec, inverse_moment


def test_l1_weights_properties():
    b = l1_weights(0.6, 50)
    assert b[0] == 1.0
    assert np.all(np.diff(b) < 0)
    assert b.sum() == pytest.approx(50**0.4)
    np.testing.assert_allclose(l1_weights(1.0, 5), [1, 0, 0, 0, 0])


@pytest.mark.parametrize("n", [3, 10, 200])
def test_thomas_matches_banded_solver(n):
    rng = np.random.default_rng(n)
    lower, upper = rng.uniform(-1, 0, n), rng.uniform(-1, 0, n)
    diag = 3.0 + rng.uniform(0, 1, n)
    rhs = rng.normal(size=n)
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    np.testing.assert_allclose(thomas_solve(lower, diag, upper, rhs), solve_banded((1, 1), ab, rhs), rtol=1e-12)


def test_alpha_one_reduces_to_black_scholes(fig2_market):
    sol = solve_frac_bs_call(fig2_market, 1.0, PdeGrid.log_price(fig2_market, 120, 80))
    exact = bs_call(fig2_market, 2.0)
    assert abs(sol.interpolate(2.0) - exact) < 0.01 * exact


def test_space_refinement_is_second_order(fig2_market):
    exact = bs_call(fig2_market, 2.0)
    errs = []
    for m in (41, 81, 161):
        grid = PdeGrid.log_price(fig2_market, time_nodes=2000, space_nodes=m)
        errs.append(abs(solve_frac_bs_call(fig2_market, 1.0, grid).interpolate(2.0) - exact))
    assert errs[0] > errs[1] > errs[2]
    assert errs[0] / errs[1] > 3.0


def test_fractional_solution_matches_monte_carlo(fig2_market):
    sol = solve_frac_bs_call(fig2_market, 0.7, PdeGrid.log_price(fig2_market, 400, 200))
    mc = price_european_closed(LaplaceExponentSpec.stable(0.7), fig2_market, MCConfig(20_000, seed=1))
    assert abs(sol.interpolate(2.0) - mc.value) < 3 * mc.std_error + 0.005


def test_comparison_principle(fig2_market):
    sol = solve_frac_bs_call(fig2_market, 0.6)
    z = sol.prices
    v = sol.values[-1]
    assert np.all(v >= -1e-12)
    assert np.all(v <= z + 1e-12)
    assert np.all(np.diff(v) >= -1e-12)


def test_boundaries_and_initial_data(fig2_market):
    sol = solve_frac_bs_call(fig2_market, 0.7)
    z = sol.prices
    np.testing.assert_allclose(sol.values[0, 1:], np.maximum(z[1:] - 2.0, 0.0))
    assert np.all(sol.values[:, 0] == 0.0)
    assert sol.values[-1, -1] == pytest.approx(z[-1])


def test_price_coordinate_agrees_with_log_coordinate(fig2_market):
    log_sol = solve_frac_bs_call(fig2_market, 0.8, PdeGrid.log_price(fig2_market, 200, 160))
    grid = PdeGrid(0.0, 40.0, 801, 200, coordinate=Coordinate.PRICE)
    price_sol = solve_frac_bs_call(fig2_market, 0.8, grid)
    assert price_sol.interpolate(2.0) == pytest.approx(log_sol.interpolate(2.0), rel=0.02)


def test_bachelier_alpha_one_matches_closed_form():
    mp = MarketParams(2.0, 2.0, 0.0, 1.0, 1.0)
    sol = solve_frac_bachelier_call(mp, 1.0)
    exact = bachelier_call(mp, 1.0)
    assert sol.interpolate(2.0) == pytest.approx(exact, rel=0.005)


@pytest.mark.parametrize("alpha", [0.5, 0.8, 1.0])
def test_pde_gap_respects_bound(alpha):
    mp = MarketParams(2.0, 2.0, 0.0, 1.0, 1.0)
    ba = solve_frac_bachelier_call(mp, alpha, PdeGrid.price(mp, 300, 321)).interpolate(2.0)
    bs = solve_frac_bs_call(mp, alpha, PdeGrid.log_price(mp, 300, 321)).interpolate(2.0)
    bound = gap_bound_constant(mp) * inverse_moment(alpha, 1.5, 1.0)
    assert -2e-3 <= ba - bs <= bound + 2e-3


def test_interpolation_in_time(fig2_market):
    sol = solve_frac_bs_call(fig2_market, 1.0)
    z = sol.prices[60]
    assert sol.interpolate(z, 0.0) == pytest.approx(z - 2.0)
    mid = sol.interpolate(2.0, 1.0)
    assert mid == pytest.approx(bs_call(fig2_market, 1.0), rel=0.02)
    with pytest.raises(ValueError):
        sol.interpolate(1e6)
    with pytest.raises(ValueError):
        sol.interpolate(2.0, 3.0)


def test_csv_output(tmp_path, fig2_market):
    sol = solve_frac_bs_call(fig2_market, 0.7, PdeGrid.log_price(fig2_market, 5, 4))
    path = tmp_path / "v.csv"
    sol.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,z,value"
    assert len(lines) == 1 + 5 * 4


def test_explicit_scheme_blows_up_on_coarse_time_grid(fig2_market):
    grid = PdeGrid.log_price(fig2_market, time_nodes=20, space_nodes=400, theta=1.0)
    with pytest.raises(PdeInstabilityError):
        solve_frac_bs_call(fig2_market, 1.0, grid)


@pytest.mark.parametrize(
    "kwargs",
    [dict(x_min=1.0, x_max=0.0), dict(space_nodes=2), dict(time_nodes=1), dict(theta=1.5)],
)
def test_grid_validation(kwargs):
    base = dict(x_min=-1.0, x_max=1.0, space_nodes=10, time_nodes=10)
    base.update(kwargs)
    with pytest.raises(ValueError):
        PdeGrid(**base)


def test_order_outside_unit_interval(fig2_market):
    with pytest.raises(ValueError):
        solve_frac_bs_call(fig2_market, 1.2)
    with pytest.raises(ValueError):
        solve_frac_bachelier_call(fig2_market, 0.5, PdeGrid.log_price(fig2_market))

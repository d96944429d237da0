import numpy as np
import pytest

from csgames.games import MixedStrategy
from csgames.lp import (
    EQUAL,
    GREATER,
    LESS,
    LinearProgram,
    MatrixGame,
    lp_solve,
    solve_matrix,
    solve_matrix_game,
    _solve_lp,
)

from oracles import closed_form_2x2, grid_minimax


def test_single_constraint_max():
    lp = LinearProgram(objective=[1.0], maximize=True)
    lp.add([1.0], LESS, 3.0)
    res = lp_solve(lp)
    assert res.optimal
    assert res.objective == pytest.approx(3.0, abs=1e-9)
    assert res.x[0] == pytest.approx(3.0, abs=1e-9)


def test_unbounded():
    lp = LinearProgram(objective=[1.0], maximize=True)
    res = lp_solve(lp)
    assert res.status == "unbounded"


def test_infeasible():
    lp = LinearProgram(objective=[1.0], maximize=True)
    lp.add([1.0], LESS, 1.0)
    lp.add([1.0], GREATER, 2.0)
    assert lp_solve(lp).status == "infeasible"


def test_equality_and_free_variable():
    # Maximise v subject to x1 - x2 >= v, x2 - x1 >= v, x1 + x2 = 1:
    # optimum v = 0 at x = (1/2, 1/2).
    lp = LinearProgram(
        objective=[0.0, 0.0, 1.0],
        maximize=True,
        lower=[0.0, 0.0, -np.inf],
    )
    lp.add([1.0, -1.0, -1.0], GREATER, 0.0)
    lp.add([-1.0, 1.0, -1.0], GREATER, 0.0)
    lp.add([1.0, 1.0, 0.0], EQUAL, 1.0)
    res = lp_solve(lp)
    assert res.optimal
    assert res.objective == pytest.approx(0.0, abs=1e-9)
    assert res.x[0] == pytest.approx(0.5, abs=1e-9)
    assert res.x[1] == pytest.approx(0.5, abs=1e-9)


def test_upper_bounds_and_min():
    lp = LinearProgram(objective=[1.0, 2.0], maximize=False, lower=[0.5, 0.0], upper=[4.0, 1.5])
    lp.add([1.0, 1.0], GREATER, 2.0)
    res = lp_solve(lp)
    assert res.optimal
    # Cheapest way to reach the row bound: push x1 as high as needed.
    assert res.objective == pytest.approx(2.0, abs=1e-9)
    assert res.x[0] == pytest.approx(2.0, abs=1e-9)


def test_dimension_mismatch():
    lp = LinearProgram(objective=[1.0, 1.0])
    with pytest.raises(Exception):
        lp.add([1.0], LESS, 1.0)
        lp_solve(lp)


def test_matching_pennies_value_and_strategies():
    game = MatrixGame(np.array([[1.0, -1.0], [-1.0, 1.0]]))
    sol = solve_matrix_game(game, ["heads", "tails"], ["heads", "tails"])
    assert abs(sol.value) <= 1e-9
    assert sol.row_strategy.probability("heads") == pytest.approx(0.5, abs=1e-8)
    assert sol.row_strategy.probability("tails") == pytest.approx(0.5, abs=1e-8)
    assert sol.col_strategy.probability("heads") == pytest.approx(0.5, abs=1e-8)


def test_constant_matrix_reports_first_pure_optimum():
    value, x, y = solve_matrix(np.full((2, 2), 2.0))
    assert value == pytest.approx(2.0)
    assert list(x) == [1.0, 0.0]
    assert list(y) == [1.0, 0.0]


def test_2x2_against_closed_form_and_grid():
    z = np.array([[3.0, 1.0], [0.0, 2.0]])
    # Frozen from the closed form v=(ad-bc)/(a+d-b-c): value 1.5,
    # row (0.5, 0.5), column (0.25, 0.75); grid search agrees to 1e-3.
    value, x, y = solve_matrix(z)
    cf_value, cf_x, cf_y = closed_form_2x2(z)
    assert cf_value == pytest.approx(1.5)
    assert value == pytest.approx(1.5, abs=1e-9)
    assert np.allclose(x, [0.5, 0.5], atol=1e-9)
    assert np.allclose(y, [0.25, 0.75], atol=1e-9)
    assert grid_minimax(z) == pytest.approx(1.5, abs=2e-3)


def test_fast_paths_match_lp_path():
    rng = np.random.default_rng(7)
    for _ in range(40):
        shape = rng.integers(1, 3, size=2) * 2 - rng.integers(0, 2, size=2)
        z = rng.uniform(-5, 5, size=(max(shape[0], 1), max(shape[1], 1)))
        value, x, y = solve_matrix(z)
        lp_value, _, _ = _solve_lp(z)
        assert value == pytest.approx(lp_value, abs=1e-7)


def test_security_of_returned_strategies():
    rng = np.random.default_rng(11)
    for _ in range(30):
        l = int(rng.integers(1, 7))
        m = int(rng.integers(1, 7))
        z = rng.uniform(-10, 10, size=(l, m))
        value, x, y = solve_matrix(z)
        assert (x @ z).min() >= value - 1e-8
        assert (z @ y).max() <= value + 1e-8
        assert z.min() - 1e-9 <= value <= z.max() + 1e-9


def test_antisymmetry():
    rng = np.random.default_rng(3)
    for _ in range(30):
        l = int(rng.integers(1, 7))
        m = int(rng.integers(1, 7))
        z = rng.uniform(-10, 10, size=(l, m))
        v1, _, _ = solve_matrix(z)
        v2, _, _ = solve_matrix(-z.T)
        assert v2 == pytest.approx(-v1, abs=1e-8)


def test_shift_equivariance():
    rng = np.random.default_rng(5)
    for _ in range(20):
        z = rng.uniform(-4, 4, size=(3, 4))
        c = float(rng.uniform(-20, 20))
        v, x, _ = solve_matrix(z)
        v2, _, _ = solve_matrix(z + c)
        assert v2 == pytest.approx(v + c, abs=1e-8)
        # The original row strategy stays optimal for the shifted game.
        assert (x @ (z + c)).min() >= v2 - 1e-8


def test_matching_pennies_runtime_under_1ms():
    import time

    game = MatrixGame(np.array([[1.0, -1.0], [-1.0, 1.0]]))
    solve_matrix_game(game)  # warm up
    t0 = time.perf_counter()
    solve_matrix_game(game)
    assert time.perf_counter() - t0 < 1e-3

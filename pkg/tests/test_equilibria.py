import itertools

import numpy as np
import pytest

from csgames.equilibria import (
    CORRELATED,
    FAIR,
    NASH,
    WELFARE,
    EquilibriumQuery,
    best_response_value,
    check_ce,
    check_epsilon_ne,
    find_ce,
    find_ne,
    negate_for_social_cost,
    solve_equilibrium,
)
from csgames.games import JointDistribution, MixedStrategy, NormalFormGame, StrategyProfile

import oracles


def matching_pennies():
    return NormalFormGame(
        (("heads1", "tails1"), ("heads2", "tails2")),
        {
            ("heads1", "heads2"): (1.0, -1.0),
            ("heads1", "tails2"): (-1.0, 1.0),
            ("tails1", "heads2"): (-1.0, 1.0),
            ("tails1", "tails2"): (1.0, -1.0),
        },
    )


PRO = ("pro1", "pro2", "pro3")
YLD = ("yld1", "yld2", "yld3")


def intersection(u2_ppp=-1000.0):
    """The three-car crossing game; u2 at (pro,pro,pro) is overridable."""
    table = {
        ("pro1", "pro2", "pro3"): (-1000.0, u2_ppp, -100.0),
        ("pro1", "pro2", "yld3"): (-1000.0, -100.0, -5.0),
        ("pro1", "yld2", "pro3"): (5.0, -5.0, 5.0),
        ("pro1", "yld2", "yld3"): (5.0, -5.0, -5.0),
        ("yld1", "pro2", "pro3"): (-5.0, -1000.0, -100.0),
        ("yld1", "pro2", "yld3"): (-5.0, 5.0, -5.0),
        ("yld1", "yld2", "pro3"): (-5.0, -5.0, 5.0),
        ("yld1", "yld2", "yld3"): (-10.0, -10.0, -10.0),
    }
    return NormalFormGame(
        (("pro1", "yld1"), ("pro2", "yld2"), ("pro3", "yld3")), table
    )


def test_best_response_matching_pennies():
    game = matching_pennies()
    value, action = best_response_value(
        game, 0, (MixedStrategy.pure("heads2"),)
    )
    assert value == pytest.approx(1.0)
    assert action == "heads1"


def test_best_response_constant_game():
    game = NormalFormGame(
        (("a", "b"), ("c",)),
        {("a", "c"): (3.0, 3.0), ("b", "c"): (3.0, 3.0)},
    )
    value, _ = best_response_value(game, 0, (MixedStrategy.pure("c"),))
    assert value == pytest.approx(3.0)


def test_best_response_intersection_row():
    game = intersection()
    value, action = best_response_value(
        game, 0, (MixedStrategy.pure("yld2"), MixedStrategy.pure("pro3"))
    )
    assert value == pytest.approx(5.0)
    assert action == "pro1"


def test_check_ne_uniform_pennies():
    game = matching_pennies()
    uniform = StrategyProfile(
        (
            MixedStrategy.uniform(["heads1", "tails1"]),
            MixedStrategy.uniform(["heads2", "tails2"]),
        )
    )
    assert check_epsilon_ne(game, uniform, 1e-9)
    pure = StrategyProfile(
        (MixedStrategy.pure("heads1"), MixedStrategy.pure("heads2"))
    )
    assert not check_epsilon_ne(game, pure, 0.5)


def test_check_ne_intersection_sfne_profile():
    game = intersection()
    profile = StrategyProfile(
        (
            MixedStrategy.pure("yld1"),
            MixedStrategy({"pro2": 1 - 0.863636, "yld2": 0.863636}),
            MixedStrategy({"pro3": 1 - 0.985148, "yld3": 0.985148}),
        )
    )
    assert check_epsilon_ne(game, profile, 1e-4)


def test_check_ce_shared_coin():
    # Pure coordination: both get 1 on a match, 0 otherwise. The
    # fair-coin joint distribution passes every regret inequality; frozen
    # from the exhaustive 2*2*2 inequality check in the oracle module.
    game = NormalFormGame(
        (("h1", "t1"), ("h2", "t2")),
        {
            ("h1", "h2"): (1.0, 1.0),
            ("h1", "t2"): (0.0, 0.0),
            ("t1", "h2"): (0.0, 0.0),
            ("t1", "t2"): (1.0, 1.0),
        },
    )
    joint = JointDistribution({("h1", "h2"): 0.5, ("t1", "t2"): 0.5})
    utilities = {
        (0, 0): (1.0, 1.0),
        (0, 1): (0.0, 0.0),
        (1, 0): (0.0, 0.0),
        (1, 1): (1.0, 1.0),
    }
    assert oracles.ce_regret_violations(
        utilities, {(0, 0): 0.5, (1, 1): 0.5}, (2, 2)
    ) == []
    assert check_ce(game, joint, 1e-9)


def test_check_ce_dominated_mass_fails():
    # Prisoner's dilemma: cooperate is strictly dominated; any mass on it
    # violates the deviation inequality for that player.
    game = NormalFormGame(
        (("c1", "d1"), ("c2", "d2")),
        {
            ("c1", "c2"): (3.0, 3.0),
            ("c1", "d2"): (0.0, 4.0),
            ("d1", "c2"): (4.0, 0.0),
            ("d1", "d2"): (1.0, 1.0),
        },
    )
    joint = JointDistribution({("c1", "c2"): 0.5, ("d1", "d2"): 0.5})
    assert not check_ce(game, joint, 1e-9)


def test_check_ce_intersection_sfce():
    game = intersection()
    joint = JointDistribution(
        {("pro1", "yld2", "pro3"): 0.5, ("yld1", "pro2", "yld3"): 0.5}
    )
    assert check_ce(game, joint, 1e-9)


def test_find_ne_matching_pennies_unique_uniform():
    game = matching_pennies()
    # Oracle: full support enumeration over all 9 support pairs finds a
    # single equilibrium, both players uniform.
    u1 = np.array([[1.0, -1.0], [-1.0, 1.0]])
    all_ne = oracles.enumerate_2p_nash(u1, -u1)
    assert len(all_ne) == 1
    assert np.allclose(all_ne[0][0], [0.5, 0.5])
    result = find_ne(game, WELFARE)
    assert np.allclose(result.values, [0.0, 0.0], atol=1e-9)
    for strat in result.witness.strategies:
        for p in strat.distribution.values():
            assert p == pytest.approx(0.5, abs=1e-9)


def test_find_ne_intersection_welfare():
    result = find_ne(intersection(), WELFARE)
    assert np.allclose(result.values, [5.0, -5.0, 5.0], atol=1e-6)
    assert result.witness.strategies[0].probability("pro1") == pytest.approx(1.0)
    assert result.witness.strategies[1].probability("yld2") == pytest.approx(1.0)
    assert result.witness.strategies[2].probability("pro3") == pytest.approx(1.0)


def test_find_ne_intersection_fair():
    result = find_ne(intersection(), FAIR)
    yields = [
        result.witness.strategies[0].probability("yld1"),
        result.witness.strategies[1].probability("yld2"),
        result.witness.strategies[2].probability("yld3"),
    ]
    assert yields[0] == pytest.approx(1.0, abs=1e-4)
    assert yields[1] == pytest.approx(0.863636, abs=1e-4)
    assert yields[2] == pytest.approx(0.985148, abs=1e-4)
    assert np.allclose(
        result.values, [-9.254050, -9.925742, -9.318182], atol=1e-4
    )


def test_find_ce_intersection_welfare_matches_ne():
    result = find_ce(intersection(), WELFARE)
    assert np.allclose(result.values, [5.0, -5.0, 5.0], atol=1e-6)
    assert result.witness.probability(("pro1", "yld2", "pro3")) == pytest.approx(1.0, abs=1e-9)


def test_find_ce_intersection_fair():
    result = find_ce(intersection(), FAIR)
    assert np.allclose(result.values, [0.0, 0.0, 0.0], atol=1e-6)
    assert result.spread <= 1e-6
    assert result.witness.probability(("pro1", "yld2", "pro3")) == pytest.approx(0.5, abs=1e-6)
    assert result.witness.probability(("yld1", "pro2", "yld3")) == pytest.approx(0.5, abs=1e-6)


def test_modified_intersection_reckless_driver():
    game = intersection(u2_ppp=-4.5)
    swne = find_ne(game, WELFARE)
    assert np.allclose(swne.values, [-5.0, 5.0, -5.0], atol=1e-6)
    # The welfare-optimal CE still has car 2 yielding and cars 1 and 3
    # proceeding, now with a small correction mass: the pure outcome lost
    # exact deviation-freeness when proceeding became cheaper for car 2.
    # Welfare optimum derived by hand from the two binding regret rows:
    # 5 - 10*eps*(201/199) with eps = 99.5/198105.5.
    swce = find_ce(game, WELFARE)
    assert swce.witness.probability(("pro1", "yld2", "pro3")) > 0.99
    assert swce.welfare == pytest.approx(4.994926945, abs=1e-6)
    assert check_ce(game, swce.witness, 1e-9)
    sfne = find_ne(game, FAIR)
    assert np.allclose(sfne.values, [-9.254050, -9.925742, -9.318182], atol=1e-4)
    # Fair CE: spread stays zero but the equalised value drops to -5/4363,
    # again from the changed regret row of car 2.
    sfce = find_ce(game, FAIR)
    assert sfce.spread <= 1e-6
    assert np.allclose(sfce.values, [-5.0 / 4363.0] * 3, atol=1e-6)
    assert check_ce(game, sfce.witness, 1e-9)


def test_negate_for_social_cost():
    game = NormalFormGame(
        (("a",), ("b",)), {("a", "b"): (3.0, 3.0)}
    )
    neg = negate_for_social_cost(game)
    assert neg.utilities[("a", "b")] == (-3.0, -3.0)
    assert negate_for_social_cost(neg).utilities == game.utilities


def test_social_cost_equals_negated_welfare():
    game = intersection()
    direct = solve_equilibrium(game, EquilibriumQuery(NASH, WELFARE, "min"))
    # Recompute by hand through the negation.
    negated = find_ne(negate_for_social_cost(game), WELFARE)
    assert np.allclose(direct.values, -negated.values, atol=1e-9)


def test_dominant_actions_win():
    # Strictly dominant actions for everyone force that pure outcome for
    # both equilibrium kinds.
    game = NormalFormGame(
        (("x1", "y1"), ("x2", "y2")),
        {
            ("x1", "x2"): (5.0, 5.0),
            ("x1", "y2"): (4.0, 1.0),
            ("y1", "x2"): (1.0, 4.0),
            ("y1", "y2"): (0.0, 0.0),
        },
    )
    ne = find_ne(game, WELFARE)
    ce = find_ce(game, WELFARE)
    assert ne.witness.strategies[0].probability("x1") == pytest.approx(1.0)
    assert ne.witness.strategies[1].probability("x2") == pytest.approx(1.0)
    assert ce.witness.probability(("x1", "x2")) == pytest.approx(1.0, abs=1e-9)


def _random_game(rng, players, actions):
    action_sets = tuple(
        tuple(f"p{i}a{k}" for k in range(actions)) for i in range(players)
    )
    utilities = {
        alpha: tuple(rng.uniform(-10.0, 10.0) for _ in range(players))
        for alpha in itertools.product(*action_sets)
    }
    return NormalFormGame(action_sets, utilities)


def test_random_games_results_verify():
    rng = np.random.default_rng(42)
    for trial in range(60):
        players = int(rng.integers(2, 4))
        actions = int(rng.integers(2, 4))
        game = _random_game(rng, players, actions)
        ne = find_ne(game, WELFARE)
        assert check_epsilon_ne(game, ne.witness, 1e-6), f"trial {trial}"
        ce = find_ce(game, WELFARE)
        assert check_ce(game, ce.witness, 1e-6), f"trial {trial}"
        assert ce.welfare >= ne.welfare - 1e-6, f"trial {trial}"


def test_random_games_fair_spread_containment():
    rng = np.random.default_rng(7)
    for _ in range(25):
        game = _random_game(rng, 2, int(rng.integers(2, 4)))
        sfne = find_ne(game, FAIR)
        sfce = find_ce(game, FAIR)
        assert check_epsilon_ne(game, sfne.witness, 1e-6)
        assert check_ce(game, sfce.witness, 1e-6)
        assert sfce.spread <= sfne.spread + 1e-6


def test_utility_shift_equivariance():
    rng = np.random.default_rng(13)
    game = _random_game(rng, 2, 3)
    shift = 4.25
    shifted = NormalFormGame(
        game.action_sets,
        {
            alpha: (vec[0] + shift, vec[1])
            for alpha, vec in game.utilities.items()
        },
    )
    ne = find_ne(game, WELFARE)
    ne_shifted = find_ne(shifted, WELFARE)
    assert ne_shifted.values[0] == pytest.approx(ne.values[0] + shift, abs=1e-6)
    # The original witness still verifies on the shifted game.
    assert check_epsilon_ne(shifted, ne.witness, 1e-6)

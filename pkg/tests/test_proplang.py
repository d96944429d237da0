from pathlib import Path

import pytest

from csgames.elaborator import elaborate
from csgames.errors import ParseError
from csgames.modlang import parse_model
from csgames.proplang import (
    And,
    Atom,
    BoolLit,
    Cumulative,
    EquilibriumOp,
    Next,
    Predicate,
    ReachReward,
    RewardObjective,
    Until,
    ZeroSumProb,
    ZeroSumReward,
    parse_properties_file,
    parse_property,
    print_property,
    typecheck,
)

MODELS = Path(__file__).resolve().parents[1] / "src" / "csgames" / "models"


def test_parse_zero_sum_probability_query():
    f = parse_property('<<usr1>> Pmax=? [ F ("sent1" & t<=D) ]')
    assert isinstance(f, ZeroSumProb)
    assert f.coalition == ("usr1",)
    assert f.query == "max"
    assert f.bound is None
    assert isinstance(f.path, Until)
    assert f.path.left == BoolLit(True)
    body = f.path.right
    assert isinstance(body, And)
    assert body.left == Atom("sent1")
    assert isinstance(body.right, Predicate)


def test_parse_equilibrium_reward_query():
    f = parse_property(
        '<<usr1:usr2>>(CE,SF)min=? (R{"time"}[ F "sent1" ] + R{"time"}[ F "sent2" ])'
    )
    assert isinstance(f, EquilibriumOp)
    assert f.coalitions == (("usr1",), ("usr2",))
    assert f.kind == "CE"
    assert f.criterion == "SF"
    assert f.opt == "min"
    assert f.bound is None
    assert len(f.objectives) == 2
    assert isinstance(f.objectives[0], RewardObjective)
    assert isinstance(f.objectives[0].formula, ReachReward)


def test_parse_trivial_state_formula():
    assert parse_property("true") == BoolLit(True)


def test_parse_bounded_queries():
    f = parse_property('<<p1>> P>=0.5 [ X "win1" ]')
    assert isinstance(f, ZeroSumProb)
    assert f.query is None
    assert f.bound[0] == ">="
    assert isinstance(f.path, Next)
    r = parse_property('<<p1>> R{"payoff1"}max>=1 [ C<=5 ]')
    assert isinstance(r, ZeroSumReward)
    assert r.query == "max"
    assert isinstance(r.formula, Cumulative)


def test_sugar_reachability_is_until():
    assert parse_property('<<p>> Pmax=? [ F "a" ]').path == parse_property(
        '<<p>> Pmax=? [ true U "a" ]'
    ).path
    bounded = parse_property('<<p>> Pmax=? [ F<=4 "a" ]').path
    explicit = parse_property('<<p>> Pmax=? [ true U<=4 "a" ]').path
    assert bounded == explicit


def test_parse_errors_are_positioned():
    with pytest.raises(ParseError):
        parse_property("<<p1>> Pmax=? [ F ")
    with pytest.raises(ParseError):
        parse_property("<<p1 p2>> Pmax=? [ F \"a\" ]")
    with pytest.raises(ParseError):
        parse_property('<<p1>>(XX,SW)max=? (P[ F "a" ] + P[ F "b" ])')


def test_print_parse_round_trip_corpus():
    for props in sorted(MODELS.glob("*.props")):
        for line, ast in parse_properties_file(props.read_text()):
            assert parse_property(print_property(ast)) == ast, line


def test_typecheck_aloha():
    game = elaborate(parse_model((MODELS / "aloha2.csg").read_text()), {})
    consts = {"q": 0.9, "bmax": 1, "D": 0}
    for line, ast in parse_properties_file((MODELS / "aloha2.props").read_text()):
        assert typecheck(ast, game, consts) == [], line
    bad = parse_property('<<usr1>> Pmax=? [ F "sent9" ]')
    diags = typecheck(bad, game, consts)
    assert len(diags) == 1 and "sent9" in diags[0]


def test_typecheck_overlapping_coalitions():
    game = elaborate(parse_model((MODELS / "aloha2.csg").read_text()), {})
    f = parse_property(
        '<<usr1,usr2:usr2>>(NE,SW)max=? (P[ F "sent1" ] + P[ F "sent2" ])'
    )
    diags = typecheck(f, game)
    assert any("two coalitions" in d for d in diags)


def test_typecheck_rejects_deep_nesting_and_bare_numeric():
    game = elaborate(parse_model((MODELS / "matching_pennies.csg").read_text()), {})
    nested = parse_property('<<p1>> Pmax=? [ F <<p2>> P>=0.5 [ X "win2" ] ]')
    assert any("nesting" in d for d in typecheck(nested, game))
    bare = parse_property('<<p1>> P=? [ X "win1" ]')
    assert any("direction" in d for d in typecheck(bare, game))


def test_typecheck_unknown_player_and_reward():
    game = elaborate(parse_model((MODELS / "matching_pennies.csg").read_text()), {})
    f = parse_property('<<p9>> R{"nope"}max=? [ F "win1" ]')
    diags = typecheck(f, game)
    assert any("p9" in d for d in diags)
    assert any("nope" in d for d in diags)

import json
from decimal import Decimal, getcontext
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coordmech import Game, InputError, io
from coordmech.io import ParseError
from coordmech.examples import chicken_bundle, coordination_bundle, direct_bundle, larger_message_bundle, pennies_bundle

from oracles import random_dgp, random_game

seeds = st.integers(0, 2**32 - 1)
BUNDLES = [chicken_bundle, coordination_bundle, direct_bundle, pennies_bundle, larger_message_bundle]


def _reparse(doc):
    return json.loads(io.dumps(doc))


@given(seeds)
def test_game_round_trip(seed):
    game = random_game(np.random.default_rng(seed))
    doc = io.game_to_json(game)
    back = io.game_from_json(_reparse(doc))
    assert back.space == game.space and back.players == game.players
    assert all(back.payoffs[i][a] == game.payoffs[i][a] for i in range(game.n_players) for a in game.space.profiles())
    assert io.game_to_json(back) == doc


@given(seeds)
def test_dgp_round_trip(seed):
    dgp = random_dgp(np.random.default_rng(seed))
    doc = io.dgp_to_json(dgp)
    back = io.dgp_from_json(_reparse(doc))
    assert back.space == dgp.space and back.eta == dgp.eta
    assert [[f.value(m) for m in dgp.space.profiles()] for f in back.feedback] == [
        [f.value(m) for m in dgp.space.profiles()] for f in dgp.feedback
    ]
    assert io.dgp_to_json(back) == doc


@pytest.mark.parametrize("bundle", BUNDLES)
def test_bundle_round_trips(bundle):
    game, dgp, sigma, target = bundle()
    strategy = io.strategy_from_json(_reparse(io.strategy_to_json(sigma, game.players)), dgp.space, game.space)
    assert strategy.maps == sigma.maps
    assert io.target_from_json(_reparse(io.target_to_json(target)), game.space) == target
    doc = io.mechanism_to_json(game, dgp, sigma, target, Fraction(1, 3), kind="hypercube")
    g, d, s, t, eps = io.mechanism_from_json(_reparse(doc))
    assert eps == Fraction(1, 3) and t == target and d.eta == dgp.eta and s.maps == sigma.maps
    assert io.mechanism_to_json(g, d, s, t, eps, kind="hypercube") == doc


def test_expression_is_accurate():
    getcontext().prec = 50
    want = Decimal(3).ln() / Decimal(2).ln() + 2
    got = io.parse_number({"expr": "log2(3)+2"})
    assert abs(Decimal(got.numerator) / Decimal(got.denominator) - want) < Decimal("1e-29")
    assert abs(io.parse_number({"expr": "(1/3)**2"}) - Fraction(1, 9)) < Fraction(1, 10**30)
    assert io.parse_number({"expr": "-sqrt(4) + exp(0)"}) == -1


@pytest.mark.parametrize("text", ["log(0)", "__import__('os')", "1 +", "x * 2", "log(2, 3)"])
def test_bad_expressions(text):
    with pytest.raises(ParseError):
        io.parse_number({"expr": text})


def test_numbers():
    assert io.parse_number(0.1) == Fraction(1, 10)
    assert io.parse_number("2/6") == Fraction(1, 3)
    assert io.parse_number(7) == 7
    assert io.format_number(Fraction(4, 2)) == "2" and io.format_number(Fraction(1, 3)) == "1/3"
    with pytest.raises(ParseError):
        io.parse_number("half", "somewhere")


def test_parse_error_has_position():
    with pytest.raises(ParseError, match="line 2, column"):
        io.parse_document('{"a": 1,\n  oops}', "bad.json")
    with pytest.raises(ParseError, match="top level"):
        io.parse_document("[1]")
    with pytest.raises(ParseError, match="expected schema"):
        io.parse_document('{"schema": "dgp/1"}', schema="game/1")


def test_game_document_errors():
    doc = io.game_to_json(Game.from_cells([[(1, 1), (0, 0)], [(0, 0), (1, 1)]]))
    missing = json.loads(json.dumps(doc))
    first = next(iter(missing["payoffs"]))
    missing["payoffs"][first].popitem()
    with pytest.raises(ParseError, match="missing profiles"):
        io.game_from_json(missing)
    bad = json.loads(json.dumps(doc))
    bad["actions"][first] = ["a,b", "c"]
    with pytest.raises(ParseError, match="label"):
        io.game_from_json(bad)
    with pytest.raises(ParseError, match="missing field"):
        io.game_from_json({"players": ["P1"]})


def test_unknown_feedback_kind():
    _, dgp, _, _ = chicken_bundle()
    doc = io.dgp_to_json(dgp)
    doc["feedback"] = [{"kind": "sparse"}]
    with pytest.raises(ParseError, match="unknown feedback kind"):
        io.dgp_from_json(doc)


def test_missing_file(tmp_path):
    with pytest.raises(InputError, match="cannot read"):
        io.load(tmp_path / "nope.json")


def test_digest_is_order_sensitive():
    assert io.digest("a", "b") != io.digest("b", "a")
    assert io.digest("ab") != io.digest("a", "b")

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coordmech import (
    Distribution,
    Game,
    InputError,
    ProductSpace,
    StrategyProfile,
    deviation_gain,
    expected_payoffs,
    is_correlated_equilibrium,
    pushforward,
)
from coordmech.examples import chicken

from oracles import random_game, random_rational

seeds = st.integers(0, 2**32 - 1)


def _random_distribution(rng, space, exact=True):
    cells = [c for c in space.profiles() if rng.random() < 0.7] or [next(space.profiles())]
    if exact:
        return Distribution(space, random_rational(rng, cells, 9))
    w = rng.dirichlet(np.ones(len(cells)))
    return Distribution(space, dict(zip(cells, w.tolist())), normalize=True)


def _random_strategy(rng, messages, actions, pure=True):
    maps = []
    for i in range(messages.ndim):
        row = {}
        for m in messages.labels[i]:
            if pure or rng.random() < 0.5:
                row[m] = actions.labels[i][int(rng.integers(actions.shape[i]))]
            else:
                row[m] = dict(zip(actions.labels[i], random_rational(rng, list(range(actions.shape[i])), 4).values()))
        maps.append(row)
    return StrategyProfile(messages, actions, maps)


def test_product_space_flat_round_trip():
    space = ProductSpace([["a", "b"], ["x", "y", "z"], ["u"]])
    assert space.size == 6 and space.shape == (2, 3, 1)
    for k in range(space.size):
        assert space.flat(space.unflat(k)) == k
    assert space.coerce("b,z,u") == (1, 2, 0)
    assert space.key((1, 2, 0)) == "b,z,u"


def test_game_validation():
    with pytest.raises(InputError):
        Game(["solo"], [["a"]], [[1]])
    with pytest.raises(InputError):
        Game(["P1", "P2"], [["a"], ["b"]], [{"a,b": 1}, {}])
    with pytest.raises(InputError):
        Game(["P1", "P2"], [["a"], []], [[[1]], [[1]]])


def test_distribution_validation():
    space = ProductSpace([["a", "b"], ["c"]])
    with pytest.raises(InputError):
        Distribution(space, {(0, 0): Fraction(1, 2)})
    with pytest.raises(InputError):
        Distribution(space, {(0, 0): Fraction(3, 2), (1, 0): Fraction(-1, 2)})
    assert Distribution(space, {(0, 0): 0.5, (1, 0): 0.5}).exact is False
    assert Distribution(space, {(0, 0): 2, (1, 0): 2}, normalize=True)[(0, 0)] == Fraction(1, 2)


def test_chicken_expected_payoffs():
    game = chicken()
    assert expected_payoffs(game, Distribution.point(game.space, (0, 0))) == (5, 5)
    assert is_correlated_equilibrium(game, Distribution.uniform(game.space))


@given(seeds)
def test_obedient_deviation_gain_is_zero(seed):
    rng = np.random.default_rng(seed)
    game = random_game(rng)
    q = _random_distribution(rng, game.space)
    for i in range(game.n_players):
        for a in game.space.labels[i]:
            assert deviation_gain(game, q, i, a, a) == 0


@given(seeds, st.booleans())
def test_pushforward_is_a_distribution(seed, pure):
    rng = np.random.default_rng(seed)
    game = random_game(rng)
    messages = ProductSpace([[f"m{j}" for j in range(int(rng.integers(1, 4)))] for _ in range(game.n_players)])
    eta = _random_distribution(rng, messages)
    sigma = _random_strategy(rng, messages, game.space, pure)
    mu = pushforward(eta, sigma)
    assert sum(w for _, w in mu.items()) == 1
    assert all(w > 0 for _, w in mu.items())
    if pure:
        image = {tuple(sigma.maps[i][mi][0][0] for i, mi in enumerate(m)) for m in eta.support}
        assert mu.support == image


@given(seeds, st.floats(0, 1e-3), st.floats(0, 1e-3))
def test_ce_check_is_monotone_in_tolerance(seed, t1, t2):
    rng = np.random.default_rng(seed)
    game = random_game(rng)
    q = _random_distribution(rng, game.space, exact=False)
    lo, hi = sorted((t1, t2))
    if is_correlated_equilibrium(game, q, lo):
        assert is_correlated_equilibrium(game, q, hi)


def test_ce_report_names_worst_deviation():
    game = chicken()
    report = is_correlated_equilibrium(game, Distribution.point(game.space, (0, 0)))
    assert not report
    assert report.worst_gain < 0 and report.worst[2] in ("a2", "b2")

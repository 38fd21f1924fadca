from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coordmech import (
    BudgetExceeded,
    ce_polytope,
    ce_vertices,
    enumerate_extreme_points,
    is_correlated_equilibrium,
    is_jointly_coherent,
    jointly_coherent_support,
    maximal_support_rational_ce,
    solve_lp,
)
from coordmech.examples import chicken, high_medium_low, matching_pennies
from coordmech.rational_lp import HPolytope, cone_extreme_rays

from oracles import brute_force_vertices, ce_support_oracle, random_game

seeds = st.integers(0, 2**32 - 1)


def test_solve_lp_small_problem():
    # max x0 + 2 x1  s.t.  x0 + x1 = 1, x1 <= 1/3
    poly = HPolytope(2, ({0: 1, 1: 1},), (Fraction(1),), ({1: 1},), (Fraction(1, 3),))
    res = solve_lp(poly, [1, 2])
    assert res.optimal and res.value == Fraction(4, 3) and res.x == (Fraction(2, 3), Fraction(1, 3))
    assert solve_lp(poly, [1, 2], "min").value == 1


def test_solve_lp_infeasible_and_unbounded():
    infeasible = HPolytope(1, ({0: 1},), (Fraction(1),), ({0: 1},), (Fraction(1, 2),))
    assert solve_lp(infeasible, [1]).status == "infeasible"
    unbounded = HPolytope(2, ({0: 1, 1: -1},), (Fraction(0),))
    assert solve_lp(unbounded, [1, 1]).status == "unbounded"


@given(seeds)
def test_lp_optimum_is_attained(seed):
    rng = np.random.default_rng(seed)
    game = random_game(rng)
    cost = rng.integers(-5, 6, size=game.space.size).tolist()
    res = solve_lp(ce_polytope(game), cost)
    assert res.optimal
    assert sum(c * x for c, x in zip(cost, res.x)) == res.value
    assert ce_polytope(game).contains(res.x)


def test_chicken_vertices():
    game = chicken()
    vertices = ce_vertices(game)
    assert len(vertices) == 5
    assert {(v[(0, 0)], v[(0, 1)], v[(1, 0)], v[(1, 1)]) for v in vertices} >= {
        (Fraction(1, 3), Fraction(1, 3), Fraction(1, 3), 0),
        (0, 1, 0, 0),
        (0, 0, 1, 0),
    }


def test_matching_pennies_unique_ce():
    (v,) = ce_vertices(matching_pennies())
    assert [v[(0, 0)], v[(0, 1)], v[(1, 0)], v[(1, 1)]] == [Fraction(1, 9), Fraction(2, 9), Fraction(2, 9), Fraction(4, 9)]


@given(seeds)
def test_vertices_are_exact_ce_and_cover_support(seed):
    rng = np.random.default_rng(seed)
    game = random_game(rng, max_actions=3)
    try:
        vertices = ce_vertices(game)
    except BudgetExceeded:
        return
    assert all(is_correlated_equilibrium(game, v, 0) for v in vertices)
    union = frozenset().union(*(v.support for v in vertices))
    assert union == jointly_coherent_support(game)


@given(seeds)
def test_support_matches_float_lp_oracle(seed):
    rng = np.random.default_rng(seed)
    game = random_game(rng)
    assert jointly_coherent_support(game) == ce_support_oracle(game)


@given(seeds)
def test_vertex_count_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    game = random_game(rng, n_players=2, max_actions=2)
    assert len(ce_vertices(game)) == len(brute_force_vertices(game))


@settings(max_examples=15)
@given(seeds)
def test_cone_enumeration_agrees_with_basis_walk(seed):
    rng = np.random.default_rng(seed)
    game = random_game(rng, n_players=2, max_actions=3)
    by_cone = {tuple(v[a] for a in game.space.profiles()) for v in ce_vertices(game)}
    by_bases = set(enumerate_extreme_points(ce_polytope(game)))
    assert by_cone == by_bases


@given(seeds)
def test_maximal_support_ce(seed):
    rng = np.random.default_rng(seed)
    game = random_game(rng, n_players=2)
    q = maximal_support_rational_ce(game)
    assert q.exact and is_correlated_equilibrium(game, q, 0)
    assert q.support == jointly_coherent_support(game)
    assert is_jointly_coherent(game, q)


def test_cone_rays_of_orthant_cut():
    # x0 >= x1 inside the 2-d orthant: rays (1, 0) and (1, 1)
    assert sorted(map(tuple, cone_extreme_rays([[1, -1]], 2))) == [(1, 0), (1, 1)]


def test_vertex_budget():
    game = high_medium_low()
    assert len(ce_vertices(game)) == 110
    with pytest.raises(BudgetExceeded):
        ce_vertices(game, limit=10)
    with pytest.raises(BudgetExceeded):
        ce_vertices(game, max_dim=4)
    with pytest.raises(BudgetExceeded):
        enumerate_extreme_points(ce_polytope(game), limit=10)

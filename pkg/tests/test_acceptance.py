"""Acceptance criteria, one test per criterion.

The terminal summary prints ``criterion N: PASS/FAIL`` for each of them; run
this file alone with ``pytest tests/test_acceptance.py``.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from coordmech import (
    BudgetExceeded,
    Distribution,
    PartiallySpecifiedDGP,
    RejectionError,
    build_constraints,
    build_mechanism,
    can_induce,
    ce_vertices,
    check_implementation,
    expected_payoffs,
    implement_jointly_coherent,
    is_correlated_equilibrium,
    is_jointly_coherent,
    jointly_coherent_support,
    line_sum_array,
    max_entropy,
    search_direct,
    unique_ce_linear_constraint,
    verify_line_sums,
)
from coordmech.constructor import RationalCE, conditional_block_check, hypercube_size, line_count
from coordmech.direct import inducing_feedback
from coordmech.examples import (
    EXPECTED,
    _table,
    chicken_bundle,
    coordination_bundle,
    direct_bundle,
    larger_message_bundle,
    pennies_bundle,
)
from coordmech.rational_lp import ce_polytope, solve_lp

from oracles import maxent_oracle, random_dgp, random_game, random_rational, random_space

CONSTRUCTION_CELL_CAP = 5000


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def _dense(dist: Distribution) -> np.ndarray:
    return np.array([float(dist[m]) for m in dist.space.profiles()])


def test_criterion_1_chicken():
    with Timer() as t:
        game, dgp, sigma, target = chicken_bundle()
        sol = max_entropy(build_constraints(dgp))
        third = _table(dgp.space, EXPECTED["chicken belief"])
        assert sol.exact and sol.belief == third

        float_dgp = PartiallySpecifiedDGP(dgp.space, Distribution(dgp.space, {(0, 0): 1.0}), dgp.feedback)
        float_belief = max_entropy(build_constraints(float_dgp)).belief
        assert np.abs(_dense(float_belief) - _dense(third)).max() <= 1e-10

        cert = check_implementation(game, dgp, sigma, target)
        assert cert.passed and cert.epsilon == 0
        assert cert.outcome == Distribution.point(game.space, (0, 0))

        welfare = solve_lp(ce_polytope(game), {game.space.flat(a): sum(u[a] for u in game.payoffs) for a in game.space.profiles()})
        best = Distribution(game.space, {game.space.unflat(k): v for k, v in enumerate(welfare.x)})
        assert expected_payoffs(game, best) == (Fraction(14, 3), Fraction(14, 3))
        assert expected_payoffs(game, target) == (5, 5)
        assert all(v > Fraction(14, 3) for v in expected_payoffs(game, target))
    assert t.elapsed < 1


def test_criterion_2_coordination():
    with Timer() as t:
        game, dgp, sigma, target = coordination_bundle()
        belief = max_entropy(build_constraints(dgp)).belief
        want = np.array([2 / 9, 4 / 9, 1 / 9, 2 / 9])
        assert np.abs(_dense(belief) - want).max() <= 1e-10
        cert = check_implementation(game, dgp, sigma, target)
        assert cert.passed and cert.epsilon == 0
        assert cert.outcome == _table(game.space, [["0", "2/3"], ["1/3", "0"]])
        report = is_correlated_equilibrium(game, target)
        assert not report and report.worst_gain < 0
    assert t.elapsed < 1


def test_criterion_3_direct():
    with Timer() as t:
        game, dgp, sigma, target = direct_bundle()
        constraints = build_constraints(dgp)
        assert abs(float(constraints.targets[0]) - (1.5 + 0.25 * math.log2(15))) <= 1e-12
        belief = max_entropy(constraints).belief
        stated = _table(game.space, EXPECTED["direct belief"])
        assert sorted(map(str, stated.as_keys().values())).count("1/12") == 3
        assert belief.tv(stated) <= 1e-8
        assert can_induce(stated, dgp.eta)
    assert t.elapsed < 1


def test_criterion_4_matching_pennies():
    with Timer() as t:
        game, dgp, sigma, target = pennies_bundle()
        vertices = ce_vertices(game)
        assert vertices == [_table(game.space, [["1/9", "2/9"], ["2/9", "4/9"]])]
        constraint = unique_ce_linear_constraint(game)
        coefs, rhs = constraint.integer_form
        assert {game.space.key(a): c for a, c in coefs.items()} == {"a1,b1": 2, "a1,b2": 1, "a2,b1": 1}
        assert rhs == Fraction(2, 3)

        delta = Distribution.point(game.space, (0, 0))
        result = search_direct(game, delta)
        assert not result.found and result.impossible

        mech = implement_jointly_coherent(game, delta)
        assert mech.dgp.space.shape == (3, 3) and mech.epsilon == 0
        assert mech.predicted_belief == Distribution.uniform(mech.dgp.space)
        cert = check_implementation(game, mech.dgp, mech.sigma, delta)
        assert cert.passed and cert.epsilon == 0
    assert t.elapsed < 2


def test_criterion_5_larger_message_set():
    with Timer() as t:
        game, dgp, sigma, target = larger_message_bundle()
        assert len(dgp.feedback) == 4
        sol = max_entropy(build_constraints(dgp))
        assert sol.exact and sol.belief == _table(dgp.space, EXPECTED["larger belief"])
        assert target == _table(game.space, [["1/3", "1/3"], ["1/3", "0"]])
        cert = check_implementation(game, dgp, sigma, target)
        assert cert.passed and cert.epsilon == 0 and cert.outcome == target
    assert t.elapsed < 1


def test_criterion_6_line_sum_arrays():
    with Timer() as t:
        checks = 0
        for d in range(1, 5):
            for n in range(1, 7):
                for r in range(n + 1):
                    arr = line_sum_array(d, n, r)
                    assert verify_line_sums(arr), (d, n, r)
                    checks += line_count(d, n)
        assert checks >= 3360
    assert t.elapsed < 5


def _construction_cases(seed: int, count: int):
    """(game, p, target) for random games with a CE vertex whose hypercube fits the cap."""
    rng = np.random.default_rng(seed)
    cases = []
    while len(cases) < count:
        game = random_game(rng)
        try:
            vertices = ce_vertices(game)
        except BudgetExceeded:
            cost = rng.integers(-5, 6, size=game.space.size).tolist()
            vertices = [Distribution(game.space, dict(zip(game.space.profiles(), solve_lp(ce_polytope(game), cost).x)))]
        fits = [v for v in vertices if hypercube_size(game, RationalCE.from_distribution(v)) <= CONSTRUCTION_CELL_CAP]
        if not fits:
            continue
        p = fits[int(rng.integers(len(fits)))]
        support = sorted(p.support)
        chosen = [a for a in support if rng.random() < 0.6] or support[:1]
        cases.append((game, p, Distribution(game.space, random_rational(rng, chosen))))
    return cases


def test_criterion_7_construction_round_trip():
    with Timer() as t:
        cases = _construction_cases(seed=7, count=100)
        assert sum(g.n_players == 3 for g, _, _ in cases) >= 10
        for game, p, target in cases:
            mech = build_mechanism(game, p, target)
            sol = max_entropy(build_constraints(mech.dgp))
            assert np.abs(_dense(sol.belief) - _dense(mech.predicted_belief)).max() <= 1e-10
            assert all(mech.block_mass(a) == p[a] for a in game.space.profiles())
            if sol.exact:
                assert all(
                    sum((sol.belief[m] for m in mech.blocks.get(a, ())), Fraction(0)) == p[a]
                    for a in game.space.profiles()
                )
            assert conditional_block_check(mech)
            cert = check_implementation(game, mech.dgp, mech.sigma, target)
            assert cert.passed and cert.epsilon == 0 and cert.outcome == target
    assert t.elapsed < 60


def test_criterion_8_joint_coherence():
    with Timer() as t:
        certified = []
        for bundle in (chicken_bundle, coordination_bundle, pennies_bundle, larger_message_bundle):
            game, dgp, sigma, target = bundle()
            cert = check_implementation(game, dgp, sigma, target)
            assert cert.passed
            certified.append((game, cert.outcome))
        game, dgp, sigma, target = direct_bundle()
        stated = _table(game.space, EXPECTED["direct belief"])
        cert = check_implementation(game, dgp, sigma, target, belief=stated)
        assert cert.passed
        certified.append((game, cert.outcome))
        for game, p, target in _construction_cases(seed=8, count=20):
            mech = build_mechanism(game, p, target)
            cert = check_implementation(game, mech.dgp, mech.sigma, target)
            assert cert.passed
            certified.append((game, cert.outcome))
        assert all(is_jointly_coherent(game, outcome) for game, outcome in certified)

        rng = np.random.default_rng(88)
        rejected = 0
        while rejected < 30:
            game = random_game(rng)
            support = jointly_coherent_support(game)
            outside = [a for a in game.space.profiles() if a not in support]
            if not outside:
                continue
            escape = outside[int(rng.integers(len(outside)))]
            inside = sorted(support)[: int(rng.integers(0, len(support) + 1))]
            target = Distribution(game.space, random_rational(rng, [escape, *inside]))
            with pytest.raises(RejectionError):
                implement_jointly_coherent(game, target)
            rejected += 1
    assert t.elapsed < 10


def _level_set_pair(rng, space):
    """(q, eta) with supp(eta) inside supp(q) and E_eta[log q] = E_q[log q]."""
    cells = list(space.profiles())
    while True:
        q_support = [c for c in cells if rng.random() < 0.8] or cells[:2]
        if len(q_support) < 2:
            continue
        w = rng.dirichlet(np.ones(len(q_support)))
        q = Distribution(space, dict(zip(q_support, w.tolist())), normalize=True)
        logq = np.array([math.log(q[c]) for c in q_support])
        level = float(sum(q[c] * math.log(q[c]) for c in q_support))
        eta_idx = [j for j in range(len(q_support)) if rng.random() < 0.7]
        if len(eta_idx) < 2:
            continue
        v = rng.dirichlet(np.ones(len(eta_idx)))
        d = logq[eta_idx] - logq[eta_idx].mean()
        if np.abs(d).max() < 1e-6:
            continue
        step = (level - float(v @ logq[eta_idx])) / float(d @ d)
        v = v + step * d
        if (v <= 1e-6).any():
            continue
        eta = Distribution(space, {q_support[j]: float(x) for j, x in zip(eta_idx, v)}, normalize=True)
        return q, eta


def test_criterion_9_inducibility_round_trip():
    with Timer() as t:
        rng = np.random.default_rng(9)
        worst = 0.0
        for _ in range(200):
            space = random_space(rng, 12)
            q, eta = _level_set_pair(rng, space)
            assert can_induce(q, eta), can_induce(q, eta).reasons
            dgp = PartiallySpecifiedDGP(space, eta, inducing_feedback(q))
            belief = max_entropy(build_constraints(dgp)).belief
            gap = belief.tv(q)
            worst = max(worst, gap)
            assert gap <= 1e-8

            off = [c for c in space.profiles() if c not in q.support]
            if off:
                leak = dict(eta.items())
                leak[off[0]] = 0.1
                assert not can_induce(q, Distribution(space, leak, normalize=True))
            top = max(q.support, key=lambda c: q[c])
            shifted = Distribution(space, {top: 1.0}) if q[top] < 0.999 else None
            if shifted is not None and abs(math.log(q[top]) + sum(-w * math.log(w) for _, w in q.items())) > 1e-6:
                assert not can_induce(q, shifted)
    assert t.elapsed < 30


def test_criterion_10_maxent_oracle():
    with Timer() as t:
        rng = np.random.default_rng(10)
        for _ in range(50):
            dgp = random_dgp(rng, 12)
            sol = max_entropy(build_constraints(dgp))
            q, h = maxent_oracle(dgp)
            assert abs(sol.entropy - h) <= 1e-8
            assert 0.5 * np.abs(_dense(sol.belief) - q).sum() <= 1e-7
    assert t.elapsed < 30


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))

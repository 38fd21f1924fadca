import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coordmech import (
    ConvergenceError,
    Distribution,
    FeedbackFunction,
    InconsistentConstraints,
    MomentConstraints,
    PartiallySpecifiedDGP,
    ProductSpace,
    build_constraints,
    max_entropy,
    verify_kkt,
)
from coordmech.examples import chicken_bundle, coordination_bundle, direct_bundle
from coordmech.maxent import forced_zero_support
from coordmech.psdgp import indicator_of

from oracles import maxent_oracle, random_dgp, random_rational, random_space

seeds = st.integers(0, 2**32 - 1)


def _dense(dist):
    return np.array([float(dist[m]) for m in dist.space.profiles()])


@given(seeds)
def test_entropy_dominates_oracle(seed):
    dgp = random_dgp(np.random.default_rng(seed))
    sol = max_entropy(build_constraints(dgp))
    _, h = maxent_oracle(dgp)
    assert sol.entropy >= h - 1e-8


@given(seeds)
def test_support_contains_eta(seed):
    dgp = random_dgp(np.random.default_rng(seed))
    sol = max_entropy(build_constraints(dgp))
    assert dgp.eta.support <= sol.belief.support
    assert not (sol.forced_zeros & sol.belief.support)


@given(seeds)
def test_kkt_holds(seed):
    dgp = random_dgp(np.random.default_rng(seed))
    constraints = build_constraints(dgp)
    sol = max_entropy(constraints)
    report = verify_kkt(sol, constraints)
    assert report.ok(1e-9)
    assert abs(report.eta_identity) <= 1e-9


@given(seeds)
def test_dual_reconstructs_primal(seed):
    dgp = random_dgp(np.random.default_rng(seed))
    constraints = build_constraints(dgp)
    sol = max_entropy(constraints)
    if math.isnan(sol.simplex_multiplier):
        return  # unique feasible point, returned exactly without multipliers
    for m in sol.belief.support:
        expo = sum(lam * float(constraints.functions[i].value(m)) for lam, i in zip(sol.duals, sol.retained))
        assert abs(math.exp(expo + sol.simplex_multiplier - 1.0) - float(sol.belief[m])) <= 1e-9


@given(seeds)
def test_marginal_constraints_give_product(seed):
    rng = np.random.default_rng(seed)
    space = random_space(rng, 12)
    eta = Distribution(space, random_rational(rng, list(space.profiles()), 9))
    feedback = [
        indicator_of(space, ["*" if c != i else lab for c in range(space.ndim)])
        for i in range(space.ndim)
        for lab in space.labels[i]
    ]
    q = max_entropy(build_constraints(PartiallySpecifiedDGP(space, eta, feedback))).belief
    margs = [eta.marginal(i) for i in range(space.ndim)]
    for m in space.profiles():
        product = math.prod(float(margs[i].get(mi, 0)) for i, mi in enumerate(m))
        assert abs(float(q[m]) - product) <= 1e-9


@given(seeds)
def test_support_constraints_give_uniform(seed):
    rng = np.random.default_rng(seed)
    space = random_space(rng, 12)
    cells = list(space.profiles())
    zeros = [c for c in cells if rng.random() < 0.4][: len(cells) - 1]
    eta = Distribution.uniform(space, [c for c in cells if c not in zeros])
    dgp = PartiallySpecifiedDGP(space, eta, [FeedbackFunction.indicator([c]) for c in zeros])
    sol = max_entropy(build_constraints(dgp))
    assert sol.belief == eta
    assert sol.forced_zeros == frozenset(zeros)


@given(seeds)
def test_equivalent_systems_share_belief(seed):
    rng = np.random.default_rng(seed)
    dgp = random_dgp(rng)
    space = dgp.space
    coefs = rng.integers(1, 4, size=len(dgp.feedback))
    combined = {m: sum(int(c) * f.value(m) for c, f in zip(coefs, dgp.feedback)) for m in space.profiles()}
    shifted = [FeedbackFunction.dense({m: 2 * f.value(m) + 1 for m in space.profiles()}) for f in dgp.feedback]
    other = dgp.with_feedback(shifted + [FeedbackFunction.dense(combined)])
    q1 = max_entropy(build_constraints(dgp)).belief
    q2 = max_entropy(build_constraints(other)).belief
    assert q1.tv(q2) <= 1e-9


def test_worked_examples():
    _, dgp, _, _ = chicken_bundle()
    sol = max_entropy(build_constraints(dgp))
    assert sol.exact and set(sol.belief.as_keys().values()) == {Fraction(1, 3)}
    assert sol.forced_zeros == frozenset({(1, 1)})

    _, dgp, _, _ = coordination_bundle()
    sol = max_entropy(build_constraints(dgp))
    assert np.abs(_dense(sol.belief) - [2 / 9, 4 / 9, 1 / 9, 2 / 9]).max() <= 1e-10

    _, dgp, _, _ = direct_bundle()
    sol = max_entropy(build_constraints(dgp))
    assert abs(sol.duals[0] + math.log(2)) <= 1e-9


def test_unique_point_returned_exactly():
    space = ProductSpace([["a", "b"], ["c", "d"]])
    eta = Distribution(space, {(0, 0): Fraction(1, 3), (1, 1): Fraction(2, 3)})
    feedback = [FeedbackFunction.indicator([c]) for c in space.profiles()]
    sol = max_entropy(build_constraints(PartiallySpecifiedDGP(space, eta, feedback)))
    assert sol.exact and sol.belief == eta and sol.kkt_residual == 0


def test_forced_zero_lp_beyond_fast_path():
    # x00 + x01 - x10 = 0 and x10 = 1/2 leave x11 = 0 only through the simplex row
    space = ProductSpace([["a", "b"], ["c", "d"]])
    eta = Distribution(space, {(0, 1): Fraction(1, 2), (1, 0): Fraction(1, 2)})
    feedback = [FeedbackFunction.dense({(0, 0): 1, (0, 1): 1, (1, 0): -1}), FeedbackFunction.indicator([(1, 0)])]
    constraints = build_constraints(PartiallySpecifiedDGP(space, eta, feedback))
    assert forced_zero_support(constraints) == frozenset({(1, 1)})
    sol = max_entropy(constraints)
    assert np.abs(_dense(sol.belief) - [0.25, 0.25, 0.5, 0]).max() <= 1e-12


def test_non_convergence_reports_best_iterate():
    _, dgp, _, _ = coordination_bundle()
    with pytest.raises(ConvergenceError) as info:
        max_entropy(build_constraints(dgp), max_iter=1)
    assert info.value.best is not None and info.value.residual > 0


def test_inconsistent_system_detected():
    space = ProductSpace([["a", "b"], ["c"]])
    f = FeedbackFunction.indicator([(0, 0)])
    constraints = MomentConstraints(space, (f, f), (Fraction(1, 2), Fraction(1, 3)))
    with pytest.raises(InconsistentConstraints):
        max_entropy(constraints)

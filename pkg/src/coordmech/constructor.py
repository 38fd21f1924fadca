"""Mechanisms that implement any jointly coherent outcome.

Hypercube construction: given a rational correlated equilibrium ``p`` with
common denominator ``k`` (``p_a = k_a / k``), every player gets ``k`` messages
per action. The block of an action profile ``a`` is a ``k x ... x k`` binary
array whose axis-parallel lines all sum to ``k_a``; the feedback discloses
that every zero cell has probability zero. The max-entropy belief is then
uniform on the one-cells, each block carries mass ``p_a``, and conditioning
on a message reproduces ``p``'s conditional, so obedience is optimal.

When ``p`` is a product of its marginals a much smaller mechanism works:
``k_i * p_i(a_i)`` messages per action, no feedback, uniform belief.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .errors import BudgetExceeded, InputError, RejectionError
from .game import Distribution, Game, ProductSpace, StrategyProfile, deviation_gain, is_correlated_equilibrium, to_fraction
from .maxent import build_constraints, max_entropy
from .psdgp import FeedbackFunction, PartiallySpecifiedDGP
from .rational_lp import DEFAULT_VERTEX_LIMIT, _support_witnesses, ce_vertices
from .verifier import ImplementationCertificate, _opponent_weights, check_implementation, reconstruct_rational

DEFAULT_MAX_CELLS = 50_000


# ---------------------------------------------------------------- line-sum arrays


@dataclass(frozen=True, eq=False)
class BinaryLineSumArray:
    d: int
    n: int
    r: int
    entries: np.ndarray

    def one_cells(self) -> list:
        """One-cells in lexicographic order."""
        return [tuple(int(x) for x in c) for c in np.argwhere(self.entries)]


def line_sum_array(d: int, n: int, r: int) -> BinaryLineSumArray:
    """A ``d``-dimensional 0/1 array of side ``n`` whose every line sums to ``r``.

    Built by stacking the ``n`` cyclic shifts of the ``(d-1)``-dimensional
    array along a new axis, starting from ``r`` ones followed by zeros.
    """
    if d < 1 or n < 1 or not 0 <= r <= n:
        raise InputError(f"need d >= 1, n >= 1 and 0 <= r <= n, got d={d}, n={n}, r={r}")
    arr = np.zeros(n, dtype=np.int8)
    arr[:r] = 1
    for _ in range(d - 1):
        arr = np.stack([np.roll(arr, s, axis=0) for s in range(n)], axis=-1)
    return BinaryLineSumArray(d, n, r, arr)


def line_count(d: int, n: int) -> int:
    return d * n ** (d - 1)


def verify_line_sums(arr, r: int | None = None) -> bool:
    """Exhaustive check that ``arr`` is binary and every axis-parallel line sums to ``r``."""
    if isinstance(arr, BinaryLineSumArray):
        r = arr.r if r is None else r
        arr = arr.entries
    arr = np.asarray(arr)
    if r is None:
        raise InputError("line sum r is required for a bare array")
    if not np.isin(arr, (0, 1)).all():
        return False
    return all((arr.sum(axis=k) == r).all() for k in range(arr.ndim))


# ---------------------------------------------------------------- rational CE


@dataclass(frozen=True, eq=False)
class RationalCE:
    p: Distribution
    k: int
    numerators: dict  # profile -> k_a

    @classmethod
    def from_distribution(cls, p: Distribution, game: Game | None = None) -> "RationalCE":
        """Wrap an exact distribution; with ``game`` given, also insist it is a CE."""
        if not p.exact:
            raise InputError("a rational distribution is required")
        if game is not None and not is_correlated_equilibrium(game, p):
            raise InputError("distribution is not a correlated equilibrium")
        k = math.lcm(*(w.denominator for _, w in p.items()))
        return cls(p, k, {a: int(w * k) for a, w in p.items()})


def _as_rational(p, game=None) -> RationalCE:
    return p if isinstance(p, RationalCE) else RationalCE.from_distribution(p, game)


# ---------------------------------------------------------------- mechanisms


@dataclass(frozen=True, eq=False)
class ConstructedMechanism:
    game: Game
    dgp: PartiallySpecifiedDGP
    sigma: StrategyProfile
    predicted_belief: Distribution
    blocks: dict  # action profile -> tuple of one-cell message profiles
    p: RationalCE
    target: Distribution
    kind: str  # "hypercube" | "product"
    epsilon: object = Fraction(0)
    certificate: ImplementationCertificate | None = field(default=None, repr=False)

    def block_mass(self, profile) -> object:
        return sum((self.predicted_belief[m] for m in self.blocks.get(profile, ())), Fraction(0))

    @property
    def n_cells(self) -> int:
        return self.dgp.space.size


def _exact_target(target: Distribution) -> Distribution:
    if target.exact:
        return target
    return Distribution(target.space, {a: to_fraction(w) for a, w in target.items()}, normalize=True)


def hypercube_size(game: Game, p: RationalCE) -> int:
    return p.k ** game.n_players * game.space.size


def build_mechanism(
    game: Game, p, target: Distribution, *, max_cells: int = DEFAULT_MAX_CELLS, require_ce: bool = True
) -> ConstructedMechanism:
    """Hypercube mechanism for ``target`` built on the rational distribution ``p``.

    ``require_ce=False`` admits approximate equilibria (the epsilon path).
    """
    p = _as_rational(p, game if require_ce else None)
    target = _exact_target(target)
    if target.space != game.space or p.p.space != game.space:
        raise InputError("target and p must be over the game's action profiles")
    if not target.support <= p.p.support:
        raise InputError("target charges profiles outside the support of p")
    size = hypercube_size(game, p)
    if size > max_cells:
        raise BudgetExceeded(f"mechanism needs {size} message profiles, budget is {max_cells}")

    k, n_players = p.k, game.n_players
    acts = game.space.labels
    messages = ProductSpace([[f"{a}#{j + 1}" for a in labels for j in range(k)] for labels in acts])
    pattern = {}
    blocks, eta = {}, {}
    for a, k_a in sorted(p.numerators.items()):
        if k_a not in pattern:
            pattern[k_a] = line_sum_array(n_players, k, k_a).one_cells()
        cells = tuple(tuple(ai * k + j for ai, j in zip(a, local)) for local in pattern[k_a])
        blocks[a] = cells
        if target[a]:
            eta[cells[0]] = target[a]
    ones = {m for cells in blocks.values() for m in cells}
    feedback = [FeedbackFunction.indicator((m,)) for m in messages.profiles() if m not in ones]
    weight = Fraction(1, k**n_players)
    predicted = Distribution(messages, {m: weight for m in ones})
    sigma = StrategyProfile(
        messages, game.space, [{messages.labels[i][m]: acts[i][m // k] for m in range(messages.shape[i])} for i in range(n_players)]
    )
    dgp = PartiallySpecifiedDGP(messages, Distribution(messages, eta), feedback)
    return ConstructedMechanism(game, dgp, sigma, predicted, blocks, p, target, "hypercube")


def product_size(p: RationalCE) -> int | None:
    if not p.p.is_product():
        return None
    return math.prod(
        math.lcm(*(w.denominator for w in p.p.marginal(i).values())) for i in range(p.p.space.ndim)
    )


def build_product_mechanism(game: Game, p, target: Distribution) -> ConstructedMechanism:
    """Mechanism with no feedback for a CE that is the product of its marginals."""
    p = _as_rational(p, game)
    target = _exact_target(target)
    if not p.p.is_product():
        raise InputError("p is not a product distribution")
    if not target.support <= p.p.support:
        raise InputError("target charges profiles outside the support of p")
    acts = game.space.labels
    labels, owners, first = [], [], []
    for i in range(game.n_players):
        marg = p.p.marginal(i)
        k_i = math.lcm(*(w.denominator for w in marg.values()))
        lab, own, start = [], [], {}
        for a in sorted(marg):
            start[a] = len(lab)
            for j in range(int(marg[a] * k_i)):
                lab.append(f"{acts[i][a]}#{j + 1}")
                own.append(a)
        labels.append(lab)
        owners.append(own)
        first.append(start)
    messages = ProductSpace(labels)
    blocks = {}
    for m in messages.profiles():
        blocks.setdefault(tuple(owners[i][mi] for i, mi in enumerate(m)), []).append(m)
    blocks = {a: tuple(ms) for a, ms in blocks.items()}
    eta = {tuple(first[i][ai] for i, ai in enumerate(a)): w for a, w in target.items()}
    sigma = StrategyProfile(
        messages, game.space, [{labels[i][m]: acts[i][owners[i][m]] for m in range(len(labels[i]))} for i in range(game.n_players)]
    )
    dgp = PartiallySpecifiedDGP(messages, Distribution(messages, eta), ())
    predicted = Distribution.uniform(messages)
    return ConstructedMechanism(game, dgp, sigma, predicted, blocks, p, target, "product")


def conditionals_match(belief: Distribution, sigma: StrategyProfile, p: Distribution) -> bool:
    """Exact check that, at every message with positive belief mass, the induced
    distribution of opponents' actions equals ``p`` conditioned on the action
    that the (pure) strategy prescribes."""
    for i in range(belief.space.ndim):
        cond_p = {}
        for a, w in p.items():
            cond_p.setdefault(a[i], {})[a[:i] + (0,) + a[i + 1:]] = w
        for m_i, row in _opponent_weights(belief, sigma, i).items():
            mass = sum(row.values())
            if not mass:
                continue
            if len(sigma.maps[i][m_i]) != 1:
                raise InputError("conditional check needs a pure strategy")
            (a_i, _), = sigma.maps[i][m_i]
            expected = cond_p.get(a_i, {})
            total = sum(expected.values())
            if not total:
                return False
            got = {key: w / mass for key, w in row.items() if w}
            if got != {key: w / total for key, w in expected.items()}:
                return False
    return True


def conditional_block_check(mech: ConstructedMechanism, p=None) -> bool:
    """Re-solve the belief from the mechanism's DGP; it must equal the predicted
    one exactly, and its conditionals must match ``p``."""
    p = _as_rational(p, None) if p is not None else mech.p
    constraints = build_constraints(mech.dgp)
    belief = reconstruct_rational(max_entropy(constraints).belief, constraints)
    if belief is None or belief != mech.predicted_belief:
        return False
    return conditionals_match(belief, mech.sigma, p.p)


# ---------------------------------------------------------------- end to end


def _mechanism_size(game: Game, p: RationalCE) -> int:
    prod = product_size(p)
    return prod if prod is not None else hypercube_size(game, p)


def _build_best(game, p: RationalCE, target, max_cells):
    if product_size(p) is not None:
        return build_product_mechanism(game, p, target)
    return build_mechanism(game, p, target, max_cells=max_cells)


def _round_preserving_support(q: Distribution, denominator: int) -> Distribution:
    approx = {}
    for a, w in q.items():
        v = w.limit_denominator(denominator)
        approx[a] = v if v > 0 else Fraction(1, denominator)
    total = sum(approx.values())
    return Distribution(q.space, {a: v / total for a, v in approx.items()})


def _min_gain(game: Game, p: Distribution):
    gains = [
        deviation_gain(game, p, i, a, b)
        for i in range(game.n_players)
        for a in set(x[i] for x in p.support)
        for b in range(game.space.shape[i])
        if b != a
    ]
    return min(gains, default=Fraction(0))


def _epsilon_path(game, target, q: Distribution, eps, max_cells, tol):
    """Round ``q`` to coarser rationals with the same support until the mechanism fits.

    Following the approximate CE costs at most ``-min gain / k`` per message,
    so the search stops at the first denominator whose mechanism is both
    within budget and within ``eps``.
    """
    eps = to_fraction(eps)
    gap = game.max_deviation_gap()
    delta = eps / gap if gap else Fraction(1)
    denominator = 1
    while True:
        denominator *= 2
        approx = RationalCE.from_distribution(_round_preserving_support(q, denominator))
        if hypercube_size(game, approx) > max_cells:
            raise BudgetExceeded(
                f"no rational approximation within epsilon {eps} fits {max_cells} message profiles "
                f"(rounding precision {float(delta):.3g} needed at most)"
            )
        worst = _min_gain(game, approx.p)
        if max(Fraction(0), -worst) / approx.k > eps:
            continue
        mech = build_mechanism(game, approx, target, max_cells=max_cells, require_ce=False)
        cert = check_implementation(game, mech.dgp, mech.sigma, mech.target, tol, belief=mech.predicted_belief, allowed_epsilon=eps)
        if cert.passed:
            return replace(mech, epsilon=cert.epsilon, certificate=cert)


def implement_jointly_coherent(
    game: Game,
    target: Distribution,
    eps=0,
    *,
    vertex_limit: int = DEFAULT_VERTEX_LIMIT,
    max_cells: int = DEFAULT_MAX_CELLS,
    tol: float = 1e-9,
) -> ConstructedMechanism:
    """Smallest available exact mechanism for ``target``; epsilon path as a fallback.

    Candidates are the CE vertices whose support covers the target plus the
    average of all vertices (whose support is the whole CE support). Raises
    RejectionError when the target charges a profile no CE charges.
    """
    if target.space != game.space:
        raise InputError("target is not over the game's action profiles")
    target = _exact_target(target)
    support, witnesses = _support_witnesses(game)
    escaped = sorted(target.support - support, key=game.space.flat)
    if escaped:
        raise RejectionError(
            "target is not jointly coherent: no correlated equilibrium charges "
            + ", ".join(game.space.key(a) for a in escaped),
            [f"profile {game.space.key(a)} is outside the correlated-equilibrium support" for a in escaped],
        )
    try:
        vertices = ce_vertices(game, vertex_limit)
    except BudgetExceeded:
        vertices = []
    if vertices:
        mean = Distribution(
            game.space,
            {a: sum((v[a] for v in vertices), Fraction(0)) / len(vertices) for a in support},
        )
        candidates = [v for v in vertices if target.support <= v.support] + [mean]
    else:
        candidates = [
            Distribution(
                game.space,
                {game.space.unflat(k): sum((x[k] for x in witnesses), Fraction(0)) / len(witnesses) for k in range(game.space.size)},
            )
        ]
    rationals = [RationalCE.from_distribution(c) for c in candidates]
    best = min(rationals, key=lambda r: _mechanism_size(game, r))
    if _mechanism_size(game, best) <= max_cells:
        mech = _build_best(game, best, target, max_cells)
        cert = check_implementation(game, mech.dgp, mech.sigma, mech.target, tol, belief=mech.predicted_belief)
        if not cert.passed:
            raise AssertionError("constructed mechanism failed verification: " + "; ".join(cert.failures()))
        return replace(mech, epsilon=cert.epsilon, certificate=cert)
    if to_fraction(eps) > 0:
        return _epsilon_path(game, target, candidates[-1], eps, max_cells, tol)
    raise BudgetExceeded(
        f"smallest exact mechanism needs {_mechanism_size(game, best)} message profiles, budget is {max_cells}"
    )

"""Check that a (game, DGP, strategy) bundle implements a target outcome.

A certificate records three verdicts:

* ``belief``: the belief used for the incentive check is the maximum-entropy
  belief of the DGP (KKT residuals within ``tol`` and support equal to the
  complement of the forced zeros);
* ``incentive``: obeying the strategy is optimal at every message with
  positive belief mass, up to the allowed epsilon;
* ``outcome``: the pushforward of eta through the strategy equals the target
  (exactly, when both are rational).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .errors import InputError
from .game import Distribution, Game, StrategyProfile, pushforward
from .maxent import KKTReport, MomentConstraints, build_constraints, forced_zero_support, max_entropy, verify_kkt
from .psdgp import PartiallySpecifiedDGP

ZERO_MASS = 1e-12
RECONSTRUCT_DENOMINATOR = 10**6
RECONSTRUCT_TOL = 1e-9


@dataclass(frozen=True)
class Slack:
    player: int
    message: int
    deviation: int
    value: object  # Fraction or float
    active: bool  # message carries positive belief mass


@dataclass(frozen=True)
class ConditionResult:
    name: str
    passed: bool
    detail: str = ""
    witness: object = None


@dataclass(frozen=True, eq=False)
class ImplementationCertificate:
    game: Game
    dgp: PartiallySpecifiedDGP
    sigma: StrategyProfile
    belief: Distribution
    target: Distribution
    outcome: Distribution
    epsilon: object
    conditions: tuple
    kkt: KKTReport
    worst: Slack | None = None
    slacks: tuple = field(default=(), repr=False)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    @property
    def exact(self) -> bool:
        return self.belief.exact

    def condition(self, name: str) -> ConditionResult:
        return next(c for c in self.conditions if c.name == name)

    def failures(self) -> list:
        return [f"{c.name}: {c.detail}" for c in self.conditions if not c.passed]


def _opponent_weights(belief: Distribution, sigma: StrategyProfile, player: int):
    """``W[m_i][a]``: belief mass on opponents playing ``a`` (``a[player]`` is a placeholder 0)."""
    table = {}
    for m, w in belief.items():
        row = table.setdefault(m[player], {})
        parts = [((0, Fraction(1)),) if j == player else sigma.maps[j][mj] for j, mj in enumerate(m)]
        stack = [((), w)]
        for opts in parts:
            stack = [(acts + (a,), wt * p) for acts, wt in stack for a, p in opts]
        for acts, wt in stack:
            row[acts] = row.get(acts, 0) + wt
    return table


def _slacks_for(game: Game, belief: Distribution, sigma: StrategyProfile, player: int, weights) -> list:
    u = game.payoffs[player]
    conv = (lambda x: x) if belief.exact else float
    out = []
    marg = belief.marginal(player)
    for m_i in range(sigma.messages.shape[player]):
        row = weights.get(m_i, {})
        mass = marg.get(m_i, 0)
        active = mass > 0 if belief.exact else mass > ZERO_MASS
        mix = sigma.maps[player][m_i]
        for b in range(game.space.shape[player]):
            total = Fraction(0) if belief.exact else 0.0
            for acts, w in row.items():
                played = sum((p * u[acts[:player] + (a,) + acts[player + 1:]] for a, p in mix), Fraction(0))
                dev = u[acts[:player] + (b,) + acts[player + 1:]]
                total += w * conv(played - dev)
            out.append(Slack(player, m_i, b, total, bool(active)))
    return out


def _check_spaces(game: Game, belief: Distribution, sigma: StrategyProfile):
    if sigma.actions != game.space:
        raise InputError("strategy actions do not match the game's action labels")
    if belief.space != sigma.messages:
        raise InputError("belief and strategy use different message spaces")


def all_slacks(game: Game, belief: Distribution, sigma: StrategyProfile) -> list:
    """Signed incentive slack for every (player, own message, deviation)."""
    _check_spaces(game, belief, sigma)
    out = []
    for i in range(game.n_players):
        out.extend(_slacks_for(game, belief, sigma, i, _opponent_weights(belief, sigma, i)))
    return out


def ic_slack(game: Game, belief: Distribution, sigma: StrategyProfile, player, message, deviation):
    """Expected gain of following ``sigma`` at ``message`` over playing ``deviation``.

    Not normalized by the message's marginal mass, so it is zero rather than
    undefined when the message is never sent.
    """
    _check_spaces(game, belief, sigma)
    i = game.player_index(player)
    m_i = sigma.messages.label_index(i, message)
    b = game.space.label_index(i, deviation)
    weights = {m_i: _opponent_weights(belief, sigma, i).get(m_i, {})}
    for s in _slacks_for(game, belief, sigma, i, weights):
        if s.message == m_i and s.deviation == b:
            return s.value
    raise AssertionError("unreachable")


def reconstruct_rational(belief: Distribution, constraints: MomentConstraints, tol: float = RECONSTRUCT_TOL):
    """Exact rational belief close to a float one, if one satisfies the constraints exactly."""
    if belief.exact:
        return belief
    guess = {p: Fraction(v).limit_denominator(RECONSTRUCT_DENOMINATOR) for p, v in belief.items()}
    if sum(guess.values()) != 1 or any(abs(float(g) - belief[p]) > tol for p, g in guess.items()):
        return None
    candidate = Distribution(belief.space, guess)
    for f, t in zip(constraints.functions, constraints.targets):
        if f.expectation(candidate) != t:
            return None
    return candidate


def _belief_condition(constraints, belief, tol):
    kkt = verify_kkt(belief, constraints)
    forced = forced_zero_support(constraints)
    support_ok = len(belief.support) == constraints.space.size - len(forced) and not belief.support & forced
    ok = kkt.ok(tol) and support_ok
    detail = f"primal {kkt.primal_residual:.3g}, stationarity {kkt.stationarity_residual:.3g}"
    if not support_ok:
        detail += "; support differs from the complement of the forced zeros"
    return kkt, ConditionResult("belief", ok, detail)


def epsilon_from_slacks(slacks) -> object:
    active = [s.value for s in slacks if s.active]
    if not active:
        return Fraction(0)
    worst = min(active)
    if worst >= 0:
        return Fraction(0) if isinstance(worst, Fraction) else 0.0
    return -worst


def check_implementation(
    game: Game,
    dgp: PartiallySpecifiedDGP,
    sigma: StrategyProfile,
    target: Distribution,
    tol: float = 1e-9,
    *,
    belief: Distribution | None = None,
    allowed_epsilon=0,
) -> ImplementationCertificate:
    """Verify all three implementation conditions and compute the tight epsilon.

    When ``belief`` is omitted the maximum-entropy belief is computed; a float
    solution is replaced by an exact rational one when such a point satisfies
    the constraints exactly and lies within ``1e-9`` of the solver output.
    """
    if sigma.messages != dgp.space:
        raise InputError("strategy messages do not match the DGP message space")
    if target.space != game.space:
        raise InputError("target is not over the game's action profiles")
    constraints = build_constraints(dgp)
    if belief is None:
        solved = max_entropy(constraints).belief
        belief = reconstruct_rational(solved, constraints) or solved
    elif belief.space != dgp.space:
        raise InputError("belief is not over the DGP message space")

    kkt, belief_cond = _belief_condition(constraints, belief, tol)
    slacks = all_slacks(game, belief, sigma)
    eps = epsilon_from_slacks(slacks)
    active = [s for s in slacks if s.active]
    worst = min(active, key=lambda s: s.value) if active else None
    limit = allowed_epsilon if belief.exact else float(allowed_epsilon) + tol
    ic_ok = eps <= limit
    ic_detail = f"epsilon {eps}"
    if worst is not None and not ic_ok:
        ic_detail += (
            f" at player {game.players[worst.player]}, message "
            f"{sigma.messages.labels[worst.player][worst.message]}, deviation "
            f"{game.space.labels[worst.player][worst.deviation]}"
        )

    outcome = pushforward(dgp.eta, sigma)
    if target.exact:
        out_ok = outcome == target
        detail = "pushforward equals target" if out_ok else f"pushforward {outcome.as_keys()} differs from target"
    else:
        gap = outcome.tv(target)
        out_ok = gap <= tol
        detail = f"total variation {gap:.3g}"

    conditions = (
        belief_cond,
        ConditionResult("incentive", bool(ic_ok), ic_detail, worst),
        ConditionResult("outcome", bool(out_ok), detail, outcome),
    )
    return ImplementationCertificate(
        game, dgp, sigma, belief, target, outcome, eps, conditions, kkt, worst, tuple(slacks)
    )


def epsilon_bound(game: Game, dgp: PartiallySpecifiedDGP, sigma: StrategyProfile, *, belief=None):
    """Smallest epsilon for which following ``sigma`` is an epsilon-best response."""
    if belief is None:
        constraints = build_constraints(dgp)
        solved = max_entropy(constraints).belief
        belief = reconstruct_rational(solved, constraints) or solved
    return epsilon_from_slacks(all_slacks(game, belief, sigma))

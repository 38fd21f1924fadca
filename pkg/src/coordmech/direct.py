"""Direct implementation: messages are action recommendations (M = A).

An outcome ``mu`` is directly implementable iff some correlated equilibrium
``q`` satisfies ``supp(mu) <= supp(q)`` and ``E_mu[log q] = E_q[log q]``.
All entropic quantities are in nats.

Equalities between sums of logarithms of rationals are decided exactly:
write each numerator and denominator over a pairwise-coprime integer basis;
logarithms of such a basis are linearly independent over the rationals, so a
rational combination of logs vanishes iff every basis coordinate does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import BudgetExceeded, InputError, RejectionError
from .game import Distribution, Game, StrategyProfile, is_correlated_equilibrium
from .psdgp import FeedbackFunction, PartiallySpecifiedDGP
from .rational_lp import _support_witnesses, ce_vertices
from .verifier import ImplementationCertificate, check_implementation

SUPPORT_MASS = 1e-12
BISECTION_TOL = 1e-10
BISECTION_MAX_ITER = 200


# ---------------------------------------------------------------- exact logs


def _coprime_basis(numbers) -> list:
    """Pairwise-coprime integers > 1 over which every input factors."""
    basis = []
    for n in numbers:
        pending = [n]
        while pending:
            x = pending.pop()
            if x <= 1:
                continue
            for k, b in enumerate(basis):
                g = math.gcd(x, b)
                if g > 1:
                    del basis[k]
                    pending.extend(v for v in (b // g, g, x // g) if v > 1)
                    break
            else:
                basis.append(x)
    return sorted(set(basis))


def _valuation(n: int, b: int) -> int:
    k = 0
    while n % b == 0:
        n //= b
        k += 1
    return k


class LogVectors:
    """Coordinates of ``log x`` for positive rationals over a shared coprime basis."""

    def __init__(self, values):
        values = [Fraction(v) for v in values]
        if any(v <= 0 for v in values):
            raise InputError("logarithm of a non-positive number")
        self.basis = _coprime_basis([v.numerator for v in values] + [v.denominator for v in values])

    def __call__(self, x) -> tuple:
        x = Fraction(x)
        return tuple(_valuation(x.numerator, b) - _valuation(x.denominator, b) for b in self.basis)

    def to_float(self, coords) -> float:
        return sum(float(c) * math.log(b) for c, b in zip(coords, self.basis))


def _log_combination(weights: dict, q: Distribution) -> tuple | None:
    """Exact coordinates of ``sum_m weights[m] log q_m`` (None if ``q`` vanishes under a weight)."""
    if any(w and q[m] == 0 for m, w in weights.items()):
        return None
    support = [m for m, w in weights.items() if w]
    logs = LogVectors([q[m] for m in support])
    total = [Fraction(0)] * len(logs.basis)
    for m in support:
        for k, c in enumerate(logs(q[m])):
            total[k] += weights[m] * c
    return tuple(total)


# ---------------------------------------------------------------- entropies


@dataclass(frozen=True)
class EntropyReport:
    entropy: float  # H(mu)
    cross_entropy: float  # H(mu, q); inf on support violation
    kl: float  # KL(mu || q)
    q_entropy: float  # H(q)
    level_set_residual: float  # H(mu, q) - H(q)
    support_ok: bool


def _entropy(dist: Distribution) -> float:
    return 0.0 - sum(float(w) * math.log(float(w)) for _, w in dist.items())


def entropy_report(mu: Distribution, q: Distribution) -> EntropyReport:
    if mu.space != q.space:
        raise InputError("distributions live on different spaces")
    h_mu, h_q = _entropy(mu), _entropy(q)
    support_ok = all(float(q[m]) > 0 for m in mu.support)
    if support_ok:
        cross = -sum(float(w) * math.log(float(q[m])) for m, w in mu.items())
        kl = sum(float(w) * math.log(float(w) / float(q[m])) for m, w in mu.items())
    else:
        cross = kl = math.inf
    return EntropyReport(h_mu, cross, kl, h_q, cross - h_q, support_ok)


def level_set_gap(mu: Distribution, q: Distribution) -> float:
    """``E_mu[log q] - E_q[log q]``; ``-inf`` when ``mu`` escapes ``supp(q)``."""
    if any(float(q[m]) <= 0 for m in mu.support):
        return -math.inf
    return sum(float(w) * math.log(float(q[m])) for m, w in mu.items()) - sum(
        float(w) * math.log(float(w)) for _, w in q.items()
    )


# ---------------------------------------------------------------- inducibility


@dataclass(frozen=True)
class InducibilityResult:
    ok: bool
    reasons: tuple
    residual: float
    exact: bool

    def __bool__(self):
        return self.ok


def can_induce(q: Distribution, eta: Distribution, tol: float = 1e-9) -> InducibilityResult:
    """Whether some feedback structure makes ``q`` the max-entropy belief when ``eta`` is true."""
    if q.space != eta.space:
        raise InputError("distributions live on different spaces")
    reasons = []
    exact = q.exact and eta.exact
    if exact:
        support_ok = eta.support <= q.support
    else:
        support_ok = all(float(q[m]) > SUPPORT_MASS for m in eta.support)
    if not support_ok:
        reasons.append("support: eta charges messages where q vanishes")
        return InducibilityResult(False, tuple(reasons), math.inf, exact)
    residual = sum(
        (float(eta[m]) - float(q[m])) * math.log(float(q[m])) for m in q.support | eta.support if float(q[m]) > 0
    )
    if exact:
        diff = {m: eta[m] - q[m] for m in q.support | eta.support}
        coords = _log_combination(diff, q)
        level_ok = coords is not None and not any(coords)
    else:
        level_ok = abs(residual) <= tol
    if not level_ok:
        reasons.append(f"expectation: E_eta[log q] - E_q[log q] = {residual:.6g}")
    return InducibilityResult(level_ok, tuple(reasons), residual, exact)


def inducing_feedback(q: Distribution) -> list:
    """``log q + 1`` on the support plus an indicator for each zero of ``q``."""
    if not q.support:
        raise InputError("q has no positive entry")
    space = q.space
    values = {m: math.log(float(w)) + 1.0 for m, w in q.items()}
    feedback = [FeedbackFunction.dense(values, name="log-belief")]
    feedback.extend(
        FeedbackFunction.indicator([m], name=f"zero {space.key(m)}") for m in space.profiles() if m not in q.support
    )
    return feedback


# ---------------------------------------------------------------- certificates


@dataclass(frozen=True, eq=False)
class DirectCertificate:
    mu: Distribution
    witness: Distribution
    support_ok: bool
    level_set_residual: float
    feedback: tuple
    implementation: ImplementationCertificate | None = None


def direct_certificate(game: Game, mu: Distribution, q: Distribution, tol: float = 1e-9) -> DirectCertificate:
    """Accept ``mu`` with witness ``q`` or raise RejectionError naming every failed condition."""
    if mu.space != game.space or q.space != game.space:
        raise InputError("outcome and witness must be over the game's action profiles")
    reasons = []
    ce = is_correlated_equilibrium(game, q)
    if not ce:
        reasons.append(f"witness is not a correlated equilibrium (worst gain {ce.worst_gain} at {ce.worst})")
    induced = can_induce(q, mu, tol)
    support_ok = "support" not in " ".join(induced.reasons)
    reasons.extend(f"level set: {r}" if r.startswith("expectation") else r for r in induced.reasons)
    if reasons:
        raise RejectionError("outcome is not directly implementable with this witness", reasons)

    feedback = tuple(inducing_feedback(q))
    dgp = PartiallySpecifiedDGP(game.space, mu, feedback)
    sigma = StrategyProfile.obedient(game.space)
    cert = check_implementation(game, dgp, sigma, mu, tol=max(tol, 1e-8))
    if not cert.passed:
        raise RejectionError("end-to-end verification failed", cert.failures())
    return DirectCertificate(mu, q, support_ok, induced.residual, feedback, cert)


@dataclass(frozen=True)
class LinearConstraint:
    """``sum_a coefficients[a] * mu_a = rhs`` after eliminating ``mu`` at ``reference``.

    ``coefficients`` and ``rhs`` are in nats. ``integer_form`` rescales them to
    coprime integers (with an exact rational right-hand side) when all
    log-coefficients are rational multiples of a single logarithm.
    """

    ce: Distribution
    reference: tuple
    coefficients: dict
    rhs: float
    integer_form: tuple | None = None  # ({profile: int}, Fraction)

    def residual(self, mu: Distribution) -> float:
        return sum(c * float(mu[a]) for a, c in self.coefficients.items()) - self.rhs

    def holds(self, mu: Distribution, tol: float = 1e-9) -> bool:
        if any(self.ce[a] == 0 for a in mu.support):
            return False
        if self.integer_form is not None and mu.exact:
            coefs, rhs = self.integer_form
            return sum(c * mu[a] for a, c in coefs.items()) == rhs
        return abs(self.residual(mu)) <= tol


def _integer_form(coord_rows: dict, rhs_coords: tuple):
    vectors = [v for v in coord_rows.values() if any(v)] + ([rhs_coords] if any(rhs_coords) else [])
    if not vectors:
        return None
    base = vectors[0]
    pivot = next(k for k, c in enumerate(base) if c)

    def scalar(v):
        s = Fraction(v[pivot]) / base[pivot]
        return s if all(c == s * b for c, b in zip(v, base)) else None

    scalars = {a: scalar(v) if any(v) else Fraction(0) for a, v in coord_rows.items()}
    rhs = scalar(rhs_coords) if any(rhs_coords) else Fraction(0)
    if rhs is None or any(s is None for s in scalars.values()):
        return None
    nonzero = [s for s in scalars.values() if s]
    if not nonzero:
        return None
    denom = math.lcm(*(s.denominator for s in nonzero))
    numer = math.gcd(*(int(s * denom) for s in nonzero))
    scale = Fraction(denom, numer)
    first = next(s for s in scalars.values() if s)
    if first < 0:
        scale = -scale
    coefs = {a: int(s * scale) for a, s in scalars.items() if s}
    return coefs, rhs * scale


def unique_ce_linear_constraint(game: Game, limit: int = 10_000) -> LinearConstraint | None:
    """Affine constraint cutting out the directly implementable outcomes of a unique-CE game.

    Returns None when the game has more than one correlated equilibrium.
    """
    vertices = ce_vertices(game, limit)
    if len(vertices) != 1:
        return None
    q = vertices[0]
    space = game.space
    support = sorted(q.support, key=space.flat)
    ref = support[-1]
    logs = LogVectors([q[a] for a in support])
    ref_log = logs(q[ref])
    coord_rows = {a: tuple(c - r for c, r in zip(logs(q[a]), ref_log)) for a in support if a != ref}
    # sum_a q_a (log q_a - log q_ref); the reference row is identically zero
    rhs_coords = tuple(
        sum((q[a] * v[k] for a, v in coord_rows.items()), Fraction(0)) for k in range(len(logs.basis))
    )
    coefficients = {a: logs.to_float(v) for a, v in coord_rows.items()}
    rhs = logs.to_float(rhs_coords)
    return LinearConstraint(q, ref, coefficients, rhs, _integer_form(coord_rows, rhs_coords))


# ---------------------------------------------------------------- search


@dataclass(frozen=True, eq=False)
class SearchResult:
    found: bool
    certificate: DirectCertificate | None = None
    impossible: bool = False  # not-found is a proof (unique equilibrium)
    diagnostics: dict = field(default_factory=dict)


def _mix(points, weights, space) -> Distribution:
    acc = {}
    for p, w in zip(points, weights):
        for a, v in p.items():
            acc[a] = acc.get(a, 0) + w * v
    return Distribution(space, acc)


def _bisect(game, mu, lo_pt, hi_pt, tol, diagnostics):
    """Root of the level-set gap on the segment ``lo_pt -> hi_pt`` (gap negative at lo, positive at hi)."""
    space = game.space
    lo, hi = Fraction(0), Fraction(1)
    for _ in range(BISECTION_MAX_ITER):
        mid = (lo + hi) / 2
        pt = _mix([lo_pt, hi_pt], [1 - mid, mid], space)
        g = level_set_gap(mu, pt)
        diagnostics["evaluations"] = diagnostics.get("evaluations", 0) + 1
        if abs(g) <= tol:
            return pt
        if g < 0:
            lo = mid
        else:
            hi = mid
    return None


def _try(game, mu, q, tol):
    try:
        return direct_certificate(game, mu, q, tol)
    except RejectionError:
        return None


def search_direct(game: Game, mu: Distribution, budget: int = 200, seed: int = 0, tol: float = BISECTION_TOL) -> SearchResult:
    """Look for a correlated equilibrium witnessing direct implementability of ``mu``.

    Sound (a returned certificate always verifies) but incomplete: a miss is
    advisory unless the game has a unique correlated equilibrium.
    """
    if mu.space != game.space:
        raise InputError("outcome is not over the game's action profiles")
    diagnostics = {"strategy": [], "evaluations": 0}
    try:
        vertices = ce_vertices(game)
    except BudgetExceeded:
        _, witnesses = _support_witnesses(game)
        vertices = [Distribution(game.space, {game.space.unflat(k): v for k, v in enumerate(x)}) for x in witnesses]
        diagnostics["strategy"].append("vertex budget exceeded; using per-profile LP optima")
    else:
        if len(vertices) == 1:
            diagnostics["strategy"].append("unique correlated equilibrium")
            cert = _try(game, mu, vertices[0], tol)
            return SearchResult(cert is not None, cert, cert is None, diagnostics)

    if vertices:
        mean = _mix(vertices, [Fraction(1, len(vertices))] * len(vertices), game.space)
        points = vertices + [mean]
    else:
        points = []
    gaps = []
    diagnostics["strategy"].append("vertex residuals")
    for p in points:
        g = level_set_gap(mu, p)
        diagnostics["evaluations"] += 1
        gaps.append(g)
        if mu.support <= p.support:
            if can_induce(p, mu, tol):
                cert = _try(game, mu, p, tol)
                if cert is not None:
                    return SearchResult(True, cert, False, diagnostics)

    diagnostics["strategy"].append("segment bisection")
    for i, (pi, gi) in enumerate(zip(points, gaps)):
        for pj, gj in zip(points[i + 1:], gaps[i + 1:]):
            if gi < 0 < gj or gj < 0 < gi:
                lo, hi = (pi, pj) if gi < 0 else (pj, pi)
                if not mu.support <= (lo.support | hi.support):
                    continue
                root = _bisect(game, mu, lo, hi, tol, diagnostics)
                if root is not None:
                    cert = _try(game, mu, root, max(tol, 1e-9))
                    if cert is not None:
                        return SearchResult(True, cert, False, diagnostics)

    diagnostics["strategy"].append("random interior sampling")
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(budget if len(points) > 1 else 0):
        w = rng.dirichlet(np.ones(len(points)))
        w = [Fraction(float(x)).limit_denominator(10**4) for x in w]
        total = sum(w)
        w = [x / total for x in w]
        p = _mix(points, w, game.space)
        g = level_set_gap(mu, p)
        diagnostics["evaluations"] += 1
        samples.append((p, g))
        if not mu.support <= p.support:
            continue
        for other, go in samples[:-1] + list(zip(points, gaps)):
            if g < 0 < go or go < 0 < g:
                lo, hi = (p, other) if g < 0 else (other, p)
                root = _bisect(game, mu, lo, hi, tol, diagnostics)
                if root is not None:
                    cert = _try(game, mu, root, max(tol, 1e-9))
                    if cert is not None:
                        return SearchResult(True, cert, False, diagnostics)
                break
    return SearchResult(False, None, False, diagnostics)

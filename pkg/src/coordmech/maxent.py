"""Maximum-entropy belief over the plausible set of a partially specified DGP.

Pipeline:

1. Forced zeros. A row that is sign-definite with target 0 pins its cells to
   zero; this is applied to a fixpoint, then any remaining forced cells are
   found with exact LPs (repeatedly maximize the mass of the undecided cells).
2. Exact rank reduction of the surviving rows on the free cells, with the
   simplex row as the first basis element. No rows left means the answer is
   uniform on the free cells; a full-rank system pins a unique point. Both
   cases are returned exactly.
3. Otherwise, damped Newton on the dual ``log sum exp(lambda . (f - b))`` in
   whitened coordinates, with backtracking and a gradient fallback.

Logarithms are natural throughout; feedback values in other bases only
rescale the multipliers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._linalg import RowBasis
from .errors import ConvergenceError, InconsistentConstraints
from .game import Distribution, ProductSpace
from .psdgp import FeedbackFunction, PartiallySpecifiedDGP
from .rational_lp import HPolytope, _StandardLP

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 500


@dataclass(frozen=True, eq=False)
class MomentConstraints:
    space: ProductSpace
    functions: tuple
    targets: tuple
    eta: Distribution | None = None

    def __len__(self):
        return len(self.functions)


@dataclass(frozen=True, eq=False)
class MaxEntSolution:
    belief: Distribution
    duals: tuple  # one multiplier per retained row
    retained: tuple  # indices of the retained rows in the constraint list
    simplex_multiplier: float
    kkt_residual: float
    forced_zeros: frozenset
    entropy: float
    iterations: int = 0

    @property
    def exact(self) -> bool:
        return self.belief.exact


@dataclass(frozen=True)
class KKTReport:
    primal_residual: float
    stationarity_residual: float
    eta_identity: float | None  # sum_m (q_m - eta_m) log q_m
    multipliers: tuple = field(default=())

    def ok(self, tol: float) -> bool:
        return self.primal_residual <= tol and self.stationarity_residual <= tol


def build_constraints(dgp: PartiallySpecifiedDGP) -> MomentConstraints:
    """One row per feedback function, target = exact expectation under eta."""
    return MomentConstraints(dgp.space, dgp.feedback, tuple(dgp.targets()), dgp.eta)


def _sign_definite(row: dict) -> bool:
    vals = iter(row.values())
    first = next(vals) > 0
    return all((v > 0) == first for v in vals)


def _eliminate(constraints: MomentConstraints):
    """Forced zeros and the surviving rows, all as flat indices."""
    space = constraints.space
    rows = {i: f.sparse_row(space) for i, f in enumerate(constraints.functions)}
    targets = constraints.targets
    forced: set = set()
    active = set(rows)
    changed = True
    while changed:
        changed = False
        for i in sorted(active):
            r = rows[i]
            if forced and any(c in forced for c in r):
                r = rows[i] = {c: v for c, v in r.items() if c not in forced}
            if not r:
                if targets[i] != 0:
                    raise InconsistentConstraints(f"row {i} is zero on the free cells but has target {targets[i]}")
                active.discard(i)
            elif targets[i] == 0 and _sign_definite(r):
                forced.update(r)
                active.discard(i)
                changed = True

    if active:
        free = [k for k in range(space.size) if k not in forced]
        pos = {k: j for j, k in enumerate(free)}
        eq_rows = [{pos[c]: v for c, v in rows[i].items()} for i in sorted(active)]
        eq_rhs = [targets[i] for i in sorted(active)]
        eq_rows.append({j: Fraction(1) for j in range(len(free))})
        eq_rhs.append(Fraction(1))
        lp = _StandardLP(HPolytope(len(free), tuple(eq_rows), tuple(eq_rhs)))
        if not lp.feasible:
            raise InconsistentConstraints("the plausible set is empty")
        eta_support = set()
        if constraints.eta is not None:
            eta_support = {space.flat(p) for p in constraints.eta.support}
        undecided = {pos[k] for k in free if k not in eta_support}
        extra = set()
        while undecided:
            res = lp.optimize({j: 1 for j in undecided}, "max")
            if res.value == 0:
                extra = undecided
                break
            undecided -= {j for j in undecided if res.x[j] > 0}
        if extra:
            forced.update(free[j] for j in extra)
            for i in list(active):
                rows[i] = {c: v for c, v in rows[i].items() if c not in forced}
                if not rows[i]:
                    active.discard(i)
    free = [k for k in range(space.size) if k not in forced]
    return forced, free, {i: rows[i] for i in sorted(active)}


def forced_zero_support(constraints: MomentConstraints) -> frozenset:
    """Cells that have probability zero in every element of the plausible set."""
    forced, _, _ = _eliminate(constraints)
    return frozenset(constraints.space.unflat(k) for k in forced)


def _entropy(values) -> float:
    return -sum(float(v) * math.log(float(v)) for v in values if v > 0)


def max_entropy(constraints: MomentConstraints, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> MaxEntSolution:
    space = constraints.space
    forced, free, rows = _eliminate(constraints)
    forced_profiles = frozenset(space.unflat(k) for k in forced)
    n = len(free)
    if n == 0:
        raise InconsistentConstraints("every message is forced to zero")
    pos = {k: j for j, k in enumerate(free)}

    basis = RowBasis()
    ones = {j: Fraction(1) for j in range(n)}
    ones[n] = Fraction(1)
    basis.add(ones)
    retained, red_rows = [], []
    for i, r in rows.items():
        aug = {pos[c]: v for c, v in r.items()}
        t = constraints.targets[i]
        if t:
            aug[n] = Fraction(t)
        p = basis.add(aug)
        if p == n:
            raise InconsistentConstraints(f"row {i} contradicts the others")
        if p is not None:
            retained.append(i)
            red_rows.append({pos[c]: v for c, v in r.items()})

    if not retained:
        w = Fraction(1, n)
        belief = Distribution(space, {space.unflat(k): w for k in free})
        return MaxEntSolution(belief, (), (), 1.0 - math.log(n), 0.0, forced_profiles, math.log(n))

    if len(basis) == n:
        x = [basis.rows[c].get(n, Fraction(0)) for c in range(n)]
        belief = Distribution(space, {space.unflat(free[j]): v for j, v in enumerate(x)})
        sol = MaxEntSolution(belief, (), tuple(retained), float("nan"), 0.0, forced_profiles, _entropy(x))
        return sol

    G = np.zeros((len(red_rows), n))
    for k, r in enumerate(red_rows):
        for j, v in r.items():
            G[k, j] = float(v)
    b = np.array([float(constraints.targets[i]) for i in retained])
    H = G - b[:, None]
    U, s, V = np.linalg.svd(H, full_matrices=False)

    def lse(nu):
        w = nu @ V
        m = w.max()
        return m + math.log(np.exp(w - m).sum()), w

    nu = np.zeros(len(s))
    resid = float("inf")
    q = np.full(n, 1.0 / n)
    it = 0
    for it in range(1, max_iter + 1):
        phi, w = lse(nu)
        q = np.exp(w - phi)
        resid = float(np.max(np.abs(G @ q - b)))
        if resid <= tol:
            break
        grad = V @ q
        hess = (V * q) @ V.T - np.outer(grad, grad)
        try:
            d = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            d = -grad
        slope = float(grad @ d)
        if not np.all(np.isfinite(d)) or slope >= 0:
            d, slope = -grad, -float(grad @ grad)
        t = 1.0
        rounding = 1e-14 * max(1.0, abs(phi))  # near the optimum decreases fall below float resolution
        while t > 1e-14:
            if lse(nu + t * d)[0] <= phi + 1e-4 * t * slope + rounding:
                break
            t *= 0.5
        nu = nu + t * d
    else:
        best = Distribution(space, {space.unflat(free[j]): float(v) for j, v in enumerate(q)}, normalize=True)
        raise ConvergenceError(f"max-entropy dual did not converge in {max_iter} iterations", best=best, residual=resid)

    phi, w = lse(nu)
    q = np.exp(w - phi)
    q = q / q.sum()
    lam = U @ (nu / s)
    simplex_mult = 1.0 - float(lam @ b) - phi
    logq = np.log(q)
    stationarity = float(np.max(np.abs(logq + 1.0 - lam @ G - simplex_mult)))
    resid = float(np.max(np.abs(G @ q - b)))
    belief = Distribution(space, {space.unflat(free[j]): float(v) for j, v in enumerate(q)})
    return MaxEntSolution(
        belief,
        tuple(float(x) for x in lam),
        tuple(retained),
        simplex_mult,
        max(resid, stationarity),
        forced_profiles,
        float(-(q * logq).sum()),
        it,
    )


def verify_kkt(solution, constraints: MomentConstraints) -> KKTReport:
    """Residuals of the optimality system for a candidate belief.

    ``solution`` is a MaxEntSolution or a bare Distribution. Stationarity is
    measured with least-squares multipliers: the belief is optimal iff
    ``log q`` on its support lies in the span of the constant and the rows.
    """
    belief = solution.belief if isinstance(solution, MaxEntSolution) else solution
    space = constraints.space
    primal = abs(float(sum(belief[p] for p in belief.support)) - 1.0)
    for f, t in zip(constraints.functions, constraints.targets):
        primal = max(primal, abs(float(f.expectation(belief)) - float(t)))

    support = sorted(belief.support, key=space.flat)
    idx = {p: j for j, p in enumerate(support)}
    cols = [np.ones(len(support))]
    for f in constraints.functions:
        col = np.zeros(len(support))
        hit = False
        for p, v in f.items():
            j = idx.get(p)
            if j is not None:
                col[j] = float(v)
                hit = True
        if hit:
            cols.append(col)
    X = np.column_stack(cols)
    y = np.log(np.array([float(belief[p]) for p in support]))
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    stationarity = float(np.max(np.abs(y - X @ coef))) if len(support) else 0.0

    eta_identity = None
    if constraints.eta is not None:
        eta = constraints.eta
        if not eta.support <= belief.support:
            eta_identity = float("inf")
        else:
            eta_identity = sum(
                (float(belief[p]) - float(eta[p])) * math.log(float(belief[p])) for p in belief.support
            )
    return KKTReport(primal, stationarity, eta_identity, tuple(float(c) for c in coef[1:]))

"""Exact rational linear programming over the correlated-equilibrium polytope.

The solver is a dense-tableau primal simplex over ``Fraction`` with Bland's
rule (termination under degeneracy, which CE polytopes have plenty of) and a
phase 1 on artificial variables. General vertex enumeration walks the graph
of feasible bases by single pivots, which is connected for a full-row-rank
standard-form system. Correlated-equilibrium vertices use double description
on the obedience cone instead, which is immune to basis degeneracy.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import BudgetExceeded, InconsistentConstraints, InputError
from .game import Distribution, Game, to_fraction

DEFAULT_VERTEX_LIMIT = 10_000
DEFAULT_BASIS_LIMIT = 200_000
DEFAULT_MAX_DIM = 64
DEFAULT_RAY_LIMIT = 50_000
DEFAULT_WORK_LIMIT = 20_000_000  # zero-set comparisons in adjacency tests


@dataclass(frozen=True, eq=False)
class HPolytope:
    """``{x >= 0 : E x = e, G x <= g}`` with sparse rational rows."""

    dim: int
    eq_rows: tuple = ()
    eq_rhs: tuple = ()
    le_rows: tuple = ()
    le_rhs: tuple = ()
    labels: tuple | None = None

    def __post_init__(self):
        if len(self.eq_rows) != len(self.eq_rhs) or len(self.le_rows) != len(self.le_rhs):
            raise InputError("row and right-hand-side counts differ")
        for row in (*self.eq_rows, *self.le_rows):
            if any(not 0 <= c < self.dim for c in row):
                raise InputError("row index outside polytope dimension")

    @property
    def n_nonneg(self) -> int:
        return self.dim

    def contains(self, x: Sequence) -> bool:
        x = [to_fraction(v) for v in x]
        if len(x) != self.dim or any(v < 0 for v in x):
            return False
        dot = lambda row: sum(v * x[c] for c, v in row.items())  # noqa: E731
        return all(dot(r) == b for r, b in zip(self.eq_rows, self.eq_rhs)) and all(
            dot(r) <= b for r, b in zip(self.le_rows, self.le_rhs)
        )


@dataclass(frozen=True)
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: Fraction | None = None
    x: tuple | None = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _pivot(T, r, j):
    pr = T[r]
    piv = pr[j]
    if piv != 1:
        pr = [v / piv for v in pr]
        T[r] = pr
    nz = [c for c, v in enumerate(pr) if v]
    for i, row in enumerate(T):
        if i == r:
            continue
        f = row[j]
        if f:
            for c in nz:
                row[c] -= f * pr[c]


def _run(T, z, basis, ncols):
    """Minimize with Bland's rule. ``z`` is the reduced-cost row (rhs = -objective)."""
    m = len(T)
    while True:
        j = next((c for c in range(ncols) if z[c] < 0), None)
        if j is None:
            return "optimal"
        best, leave = None, None
        for r in range(m):
            a = T[r][j]
            if a > 0:
                ratio = T[r][-1] / a
                if best is None or ratio < best or (ratio == best and basis[r] < basis[leave]):
                    best, leave = ratio, r
        if leave is None:
            return "unbounded"
        T.append(z)
        _pivot(T, leave, j)
        z[:] = T.pop()
        basis[leave] = j


class _StandardLP:
    """Phase-1 feasible tableau for a polytope, reusable across objectives."""

    def __init__(self, poly: HPolytope):
        n = poly.dim
        n_le = len(poly.le_rows)
        self.n = n
        self.ncols = n + n_le
        rows, needs_art = [], []
        for row, b in zip(poly.eq_rows, poly.eq_rhs):
            dense = [Fraction(0)] * (self.ncols + 1)
            for c, v in row.items():
                dense[c] = Fraction(v)
            dense[-1] = Fraction(b)
            if dense[-1] < 0:
                dense = [-v for v in dense]
            rows.append(dense)
            needs_art.append(True)
        for k, (row, b) in enumerate(zip(poly.le_rows, poly.le_rhs)):
            dense = [Fraction(0)] * (self.ncols + 1)
            for c, v in row.items():
                dense[c] = Fraction(v)
            dense[n + k] = Fraction(1)
            dense[-1] = Fraction(b)
            if dense[-1] < 0:
                dense = [-v for v in dense]
                needs_art.append(True)
            else:
                needs_art.append(False)
            rows.append(dense)

        n_art = sum(needs_art)
        total = self.ncols + n_art
        T, basis = [], []
        art = self.ncols
        for r, dense in enumerate(rows):
            full = dense[:-1] + [Fraction(0)] * n_art + [dense[-1]]
            if needs_art[r]:
                full[art] = Fraction(1)
                basis.append(art)
                art += 1
            else:
                basis.append(self.n + (r - len(poly.eq_rows)))
            T.append(full)

        self.feasible = True
        if n_art:
            z = [Fraction(0)] * (total + 1)
            for c in range(self.ncols, total):
                z[c] = Fraction(1)
            for r, b in enumerate(basis):
                if b >= self.ncols:
                    z = [zv - tv for zv, tv in zip(z, T[r])]
            _run(T, z, basis, total)
            if -z[-1] != 0:
                self.feasible = False
                return
            # drive zero-valued artificials out of the basis, dropping redundant rows
            r = 0
            while r < len(T):
                if basis[r] >= self.ncols:
                    j = next((c for c in range(self.ncols) if T[r][c] != 0), None)
                    if j is None:
                        del T[r], basis[r]
                        continue
                    _pivot(T, r, j)
                    basis[r] = j
                r += 1
            T = [row[: self.ncols] + [row[-1]] for row in T]
        self.T = T
        self.basis = basis

    def optimize(self, cost: dict, sense: str = "max") -> LPResult:
        if not self.feasible:
            return LPResult("infeasible")
        sign = -1 if sense == "max" else 1
        T = [row[:] for row in self.T]
        basis = self.basis[:]
        c = [Fraction(0)] * (self.ncols + 1)
        for j, v in cost.items():
            c[j] = sign * to_fraction(v)
        z = c[:]
        for r, b in enumerate(basis):
            cb = c[b]
            if cb:
                z = [zv - cb * tv for zv, tv in zip(z, T[r])]
        status = _run(T, z, basis, self.ncols)
        if status == "unbounded":
            return LPResult("unbounded")
        x = _vertex(T, basis, self.n)
        return LPResult("optimal", sign * -z[-1], x)


def _vertex(T, basis, n):
    x = [Fraction(0)] * n
    for r, b in enumerate(basis):
        if b < n:
            x[b] = T[r][-1]
    return tuple(x)


def solve_lp(poly: HPolytope, objective, sense: str = "max") -> LPResult:
    """Optimize a linear objective exactly. ``objective`` is a dense vector or sparse dict."""
    if sense not in ("max", "min"):
        raise InputError(f"sense must be 'max' or 'min', got {sense!r}")
    if not isinstance(objective, dict):
        objective = {i: v for i, v in enumerate(objective) if v}
    if any(not 0 <= i < poly.dim for i in objective):
        raise InputError("objective dimension does not match polytope")
    return _StandardLP(poly).optimize(objective, sense)


def ce_polytope(game: Game) -> HPolytope:
    """Obedience constraints ``sum_{a_-i} q(a_i,a_-i)[u_i(b,a_-i) - u_i(a)] <= 0`` plus the simplex."""
    space = game.space
    rows = []
    for i, u in enumerate(game.payoffs):
        for a in range(space.shape[i]):
            for b in range(space.shape[i]):
                if a == b:
                    continue
                row = {}
                for prof in space.profiles():
                    if prof[i] != a:
                        continue
                    dev = prof[:i] + (b,) + prof[i + 1:]
                    v = u[dev] - u[prof]
                    if v:
                        row[space.flat(prof)] = v
                rows.append(row)
    ones = {k: Fraction(1) for k in range(space.size)}
    labels = tuple(space.key(p) for p in space.profiles())
    return HPolytope(space.size, (ones,), (Fraction(1),), tuple(rows), (Fraction(0),) * len(rows), labels)


def enumerate_extreme_points(
    poly: HPolytope,
    limit: int = DEFAULT_VERTEX_LIMIT,
    *,
    max_bases: int = DEFAULT_BASIS_LIMIT,
    max_dim: int = DEFAULT_MAX_DIM,
) -> list:
    """All vertices of a bounded polytope, exact and deduplicated, in discovery order."""
    if poly.dim > max_dim:
        raise BudgetExceeded(f"dimension {poly.dim} exceeds guard {max_dim}")
    lp = _StandardLP(poly)
    if not lp.feasible:
        return []
    n, ncols = lp.n, lp.ncols
    seen = {frozenset(lp.basis)}
    queue = deque([(lp.T, lp.basis)])
    vertices = {}
    while queue:
        T, basis = queue.popleft()
        x = _vertex(T, basis, n)
        if x not in vertices:
            vertices[x] = None
            if len(vertices) > limit:
                raise BudgetExceeded(f"more than {limit} extreme points")
        in_basis = set(basis)
        for j in range(ncols):
            if j in in_basis:
                continue
            best, rows = None, []
            for r, row in enumerate(T):
                a = row[j]
                if a > 0:
                    ratio = row[-1] / a
                    if best is None or ratio < best:
                        best, rows = ratio, [r]
                    elif ratio == best:
                        rows.append(r)
            for r in rows:
                nb = basis[:]
                nb[r] = j
                key = frozenset(nb)
                if key in seen:
                    continue
                seen.add(key)
                if len(seen) > max_bases:
                    raise BudgetExceeded(f"more than {max_bases} feasible bases visited")
                T2 = [row[:] for row in T]
                _pivot(T2, r, j)
                queue.append((T2, nb))
    return list(vertices)


def _support_witnesses(game: Game):
    """Per-profile mass maximization; returns (support, optimal vertices that witnessed it)."""
    lp = _StandardLP(ce_polytope(game))
    if not lp.feasible:
        raise InconsistentConstraints("empty correlated-equilibrium polytope")
    space = game.space
    support, witnesses = set(), []
    for k in range(space.size):
        if k in support:
            continue
        res = lp.optimize({k: 1}, "max")
        if not res.optimal:
            raise InconsistentConstraints(f"profile LP returned {res.status}")
        if res.value > 0:
            witnesses.append(res.x)
            support.update(c for c, v in enumerate(res.x) if v > 0)
    return frozenset(space.unflat(k) for k in support), witnesses


def jointly_coherent_support(game: Game) -> frozenset:
    """Profiles carrying positive mass in some correlated equilibrium."""
    return _support_witnesses(game)[0]


def is_jointly_coherent(game: Game, mu: Distribution) -> bool:
    if mu.space != game.space:
        raise InputError("distribution is not over the game's action profiles")
    return mu.support <= jointly_coherent_support(game)


def _average(game: Game, points) -> Distribution:
    space = game.space
    n = len(points)
    return Distribution(space, {space.unflat(k): sum(p[k] for p in points) / n for k in range(space.size)})


def maximal_support_rational_ce(game: Game, limit: int = DEFAULT_VERTEX_LIMIT) -> Distribution:
    """Average of all extreme points of CE(game); its support is the whole CE support."""
    vertices = ce_vertices(game, limit)
    return _average(game, [[v[a] for a in game.space.profiles()] for v in vertices])


def maximal_support_ce_by_lp(game: Game) -> Distribution:
    """Cheaper maximal-support CE: average of the per-profile LP optima."""
    _, witnesses = _support_witnesses(game)
    return _average(game, witnesses)


def _rank_mod_p(vectors, n: int, p: int = 2_147_483_647) -> int:
    """Rank over GF(p); never exceeds the rational rank, which is all the caller needs."""
    pivots = {}
    for v in vectors:
        v = [x % p for x in v]
        for c, row in pivots.items():
            if v[c]:
                f = v[c]
                v = [(a - f * b) % p for a, b in zip(v, row)]
        lead = next((c for c, x in enumerate(v) if x), None)
        if lead is None:
            continue
        inv = pow(v[lead], p - 2, p)
        pivots[lead] = [x * inv % p for x in v]
        if len(pivots) == n:
            break
    return len(pivots)


def _integer_row(row: dict, n: int) -> list:
    den = math.lcm(*(Fraction(v).denominator for v in row.values()))
    out = [0] * n
    for c, v in row.items():
        out[c] = int(v * den)
    return out


def cone_extreme_rays(rows, n: int, ray_limit: int = DEFAULT_RAY_LIMIT, work_limit: int = DEFAULT_WORK_LIMIT) -> list:
    """Extreme rays of ``{x >= 0 : a.x >= 0 for a in rows}`` by double description.

    Starts from the orthant and cuts one row at a time, combining only
    adjacent ray pairs (combinatorial test on zero sets). Rays are primitive
    integer vectors. ``work_limit`` caps the zero-set comparisons so that
    hopeless instances fail fast.
    """
    work = 0
    rays = [[int(i == k) for i in range(n)] for k in range(n)]
    full = (1 << n) - 1
    masks = [full & ~(1 << k) for k in range(n)]
    for j, a in enumerate(rows):
        if not any(a):
            continue
        bit = 1 << (n + j)
        vals = [sum(x * y for x, y in zip(a, r) if x and y) for r in rays]
        neg = [i for i, v in enumerate(vals) if v < 0]
        if not neg:
            masks = [m | bit if v == 0 else m for m, v in zip(masks, vals)]
            continue
        pos = [i for i, v in enumerate(vals) if v > 0]
        floor = _rank_mod_p(rays, n) - 2
        new_rays, new_masks = [], []
        for i, v in enumerate(vals):
            if v >= 0:
                new_rays.append(rays[i])
                new_masks.append(masks[i] | bit if v == 0 else masks[i])
        for p in pos:
            for q in neg:
                z = masks[p] & masks[q]
                if z.bit_count() < floor:
                    continue
                work += len(masks)
                if work > work_limit:
                    raise BudgetExceeded("vertex enumeration exceeded its work budget")
                if sum(1 for m in masks if m & z == z) > 2:
                    continue
                vec = [vals[p] * y - vals[q] * x for x, y in zip(rays[p], rays[q])]
                g = math.gcd(*vec)
                new_rays.append([x // g for x in vec])
                new_masks.append(z | bit)
                if len(new_rays) > ray_limit:
                    raise BudgetExceeded(f"more than {ray_limit} intermediate rays")
        rays, masks = new_rays, new_masks
    return rays


def ce_vertices(game: Game, limit: int = DEFAULT_VERTEX_LIMIT, *, max_dim: int = DEFAULT_MAX_DIM) -> list:
    """Extreme points of CE(game) as exact Distributions, in a canonical order.

    Obedience constraints are homogeneous, so the vertices are the extreme
    rays of the cone they cut from the orthant, scaled to total mass one.
    """
    space = game.space
    if space.size > max_dim:
        raise BudgetExceeded(f"dimension {space.size} exceeds guard {max_dim}")
    poly = ce_polytope(game)
    rows = [_integer_row({c: -v for c, v in r.items()}, space.size) for r in poly.le_rows if r]
    rays = cone_extreme_rays(rows, space.size)
    if len(rays) > limit:
        raise BudgetExceeded(f"more than {limit} extreme points")
    points = sorted((tuple(Fraction(x, sum(r)) for x in r) for r in rays), reverse=True)
    return [Distribution(space, {space.unflat(k): v for k, v in enumerate(x) if v}) for x in points]

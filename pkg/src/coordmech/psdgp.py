"""Message spaces, feedback structures and partially specified DGPs."""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from ._linalg import RowBasis
from .errors import InputError
from .game import Distribution, ProductSpace, to_fraction
from .rational_lp import HPolytope

MessageSpace = ProductSpace


class FeedbackFunction:
    """A real function on M whose expectation under the true DGP is disclosed.

    Indicators keep only their cell set; dense functions keep a sparse
    ``{profile: Fraction}`` map (absent cells are zero).
    """

    __slots__ = ("kind", "cells", "values", "name")

    def __init__(self, kind: str, cells=None, values=None, name: str | None = None):
        if kind == "indicator":
            self.cells = frozenset(cells)
            self.values = None
        elif kind == "dense":
            self.cells = None
            self.values = {p: to_fraction(v) for p, v in values.items() if v}
        else:
            raise InputError(f"unknown feedback kind {kind!r}")
        self.kind = kind
        self.name = name

    @classmethod
    def indicator(cls, cells: Iterable, name=None) -> "FeedbackFunction":
        return cls("indicator", cells=cells, name=name)

    @classmethod
    def dense(cls, values: Mapping, name=None) -> "FeedbackFunction":
        return cls("dense", values=values, name=name)

    def items(self):
        """Nonzero (profile, value) pairs."""
        if self.kind == "indicator":
            return ((c, Fraction(1)) for c in self.cells)
        return self.values.items()

    def value(self, profile) -> Fraction:
        if self.kind == "indicator":
            return Fraction(1) if profile in self.cells else Fraction(0)
        return self.values.get(profile, Fraction(0))

    def expectation(self, dist: Distribution):
        if self.kind == "indicator" and len(dist) < len(self.cells):
            return sum((w for p, w in dist.items() if p in self.cells), Fraction(0) if dist.exact else 0.0)
        zero = Fraction(0) if dist.exact else 0.0
        if dist.exact:
            return sum((v * dist[p] for p, v in self.items()), zero)
        return sum((float(v) * dist[p] for p, v in self.items()), zero)

    def sparse_row(self, space: ProductSpace) -> dict:
        return {space.flat(p): v for p, v in self.items()}

    def __repr__(self):
        if self.kind == "indicator":
            return f"FeedbackFunction.indicator({sorted(self.cells)})"
        return f"FeedbackFunction.dense({len(self.values)} nonzeros)"


class PartiallySpecifiedDGP:
    """Message space, true distribution eta, public feedback structure.

    ``eta`` is kept exact. Float inputs are converted to the rationals they
    represent and renormalized exactly.
    """

    def __init__(self, space: ProductSpace, eta: Distribution, feedback: Sequence[FeedbackFunction] = ()):
        if eta.space != space:
            raise InputError("eta is not over the message space")
        if not eta.exact:
            eta = Distribution(space, {p: to_fraction(w) for p, w in eta.items()}, normalize=True)
        for f in feedback:
            cells = f.cells if f.kind == "indicator" else f.values
            for p in cells:
                if len(p) != space.ndim or any(not 0 <= i < n for i, n in zip(p, space.shape)):
                    raise InputError(f"feedback function references a profile outside M: {p}")
        self.space = space
        self.eta = eta
        self.feedback = tuple(feedback)

    def targets(self) -> list:
        return [f.expectation(self.eta) for f in self.feedback]

    def with_feedback(self, feedback) -> "PartiallySpecifiedDGP":
        return PartiallySpecifiedDGP(self.space, self.eta, feedback)

    def with_eta(self, eta: Distribution) -> "PartiallySpecifiedDGP":
        return PartiallySpecifiedDGP(self.space, eta, self.feedback)

    def __repr__(self):
        return f"PartiallySpecifiedDGP(shape={self.space.shape}, |F|={len(self.feedback)})"


def _augmented(f: FeedbackFunction, target, space: ProductSpace) -> dict:
    row = f.sparse_row(space)
    if target:
        row[space.size] = target
    return row


def reduce_feedback(dgp: PartiallySpecifiedDGP) -> PartiallySpecifiedDGP:
    """Keep a maximal linearly independent subset of the (row, target) pairs."""
    basis = RowBasis()
    kept = []
    for f, t in zip(dgp.feedback, dgp.targets()):
        if basis.add(_augmented(f, t, dgp.space)) is not None:
            kept.append(f)
    return dgp.with_feedback(kept)


def _constraint_basis(dgp: PartiallySpecifiedDGP) -> RowBasis:
    space = dgp.space
    basis = RowBasis()
    ones = {k: Fraction(1) for k in range(space.size)}
    ones[space.size] = Fraction(1)
    basis.add(ones)
    for f, t in zip(dgp.feedback, dgp.targets()):
        basis.add(_augmented(f, t, space))
    return basis


def informationally_equivalent(d1: PartiallySpecifiedDGP, d2: PartiallySpecifiedDGP) -> bool:
    """Same message space and the same affine constraint set (simplex row included)."""
    if d1.space != d2.space:
        return False
    b1 = _constraint_basis(d1)
    b2 = _constraint_basis(d2)
    if len(b1) != len(b2):
        return False
    return all(not b1.reduce(row) for row in b2.rows.values())


def plausible_set_polytope(dgp: PartiallySpecifiedDGP) -> HPolytope:
    """Exact H-representation of the distributions matching every disclosed moment."""
    space = dgp.space
    rows = [f.sparse_row(space) for f in dgp.feedback]
    rhs = list(dgp.targets())
    rows.append({k: Fraction(1) for k in range(space.size)})
    rhs.append(Fraction(1))
    labels = tuple(space.key(p) for p in space.profiles())
    return HPolytope(space.size, tuple(rows), tuple(rhs), labels=labels)


def indicator_of(space: ProductSpace, pattern) -> FeedbackFunction:
    """Indicator of all profiles matching ``pattern``; ``"*"`` matches any label.

    ``indicator_of(M, "m1,*")`` is the marginal event that player 1 receives m1.
    """
    if isinstance(pattern, str):
        pattern = [s.strip() for s in pattern.split(",")]
    if len(pattern) != space.ndim:
        raise InputError(f"pattern {pattern!r} has the wrong number of coordinates")
    choices = [
        range(space.shape[c]) if x == "*" else [space.label_index(c, x)] for c, x in enumerate(pattern)
    ]
    return FeedbackFunction.indicator(itertools.product(*choices), name=",".join(map(str, pattern)))

"""Exact sparse row reduction over the rationals."""

from __future__ import annotations

from fractions import Fraction


def _axpy(target: dict, scale, source: dict):
    # target -= scale * source, dropping exact zeros
    for c, v in source.items():
        nv = target.get(c, 0) - scale * v
        if nv:
            target[c] = nv
        else:
            target.pop(c, None)


class RowBasis:
    """Incremental reduced row echelon form.

    Rows are ``{column: Fraction}`` dicts. Every stored row has a unit pivot
    and zeros in all other pivot columns, so reducing a new row needs a
    single pass.
    """

    def __init__(self):
        self.rows: dict[int, dict] = {}

    def __len__(self):
        return len(self.rows)

    def reduce(self, row: dict) -> dict:
        row = {c: Fraction(v) for c, v in row.items() if v}
        for c in [c for c in row if c in self.rows]:
            v = row.get(c)
            if v:
                _axpy(row, v, self.rows[c])
        return row

    def add(self, row: dict):
        """Insert ``row``; return its pivot column, or None if it was dependent."""
        r = self.reduce(row)
        if not r:
            return None
        p = min(r)
        inv = r[p]
        r = {c: v / inv for c, v in r.items()}
        for other in self.rows.values():
            v = other.get(p)
            if v:
                _axpy(other, v, r)
        self.rows[p] = r
        return p


def rank(rows) -> int:
    basis = RowBasis()
    for r in rows:
        basis.add(r)
    return len(basis)


def solve_unique(rows, rhs, n: int):
    """Solve ``A x = b`` exactly when the solution is unique; else None.

    Raises ValueError if the system is inconsistent.
    """
    basis = RowBasis()
    for r, b in zip(rows, rhs):
        row = dict(r)
        if b:
            row[n] = Fraction(b)
        p = basis.add(row)
        if p == n:
            raise ValueError("inconsistent linear system")
    if len(basis) != n:
        return None
    return [basis.rows[c].get(n, Fraction(0)) for c in range(n)]


def dense_to_sparse(vec) -> dict:
    return {i: Fraction(v) for i, v in enumerate(vec) if v}

"""Exact sparse linear algebra over the rationals.

Everything here works with ``fractions.Fraction`` so that ranks, kernels and
Betti numbers come out exactly.  Matrices are immutable after construction;
elimination always runs on internal copies.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

Q = Fraction


class CompositionNonzero(Exception):
    """Raised when two supposed consecutive differentials do not compose to 0."""


def _as_q(x) -> Q:
    if isinstance(x, Q):
        return x
    return Q(x)


class SparseMatrix:
    """Immutable sparse matrix over Q. Entries: {(row, col): nonzero Fraction}."""

    __slots__ = ("rows", "cols", "entries", "_hash")

    def __init__(self, rows: int, cols: int, entries: Optional[Mapping[Tuple[int, int], Q]] = None):
        if rows < 0 or cols < 0:
            raise ValueError("negative matrix dimensions")
        clean: Dict[Tuple[int, int], Q] = {}
        for (i, j), v in (entries or {}).items():
            if not (0 <= i < rows and 0 <= j < cols):
                raise ValueError(f"entry ({i},{j}) out of range for {rows}x{cols} matrix")
            v = _as_q(v)
            if v != 0:
                clean[(i, j)] = v
        self.rows = rows
        self.cols = cols
        self.entries = clean
        self._hash = None

    @classmethod
    def from_rows(cls, data: Iterable[Iterable]) -> "SparseMatrix":
        rows = [list(r) for r in data]
        n = len(rows)
        m = len(rows[0]) if rows else 0
        ent = {}
        for i, r in enumerate(rows):
            if len(r) != m:
                raise ValueError("ragged rows")
            for j, v in enumerate(r):
                if v:
                    ent[(i, j)] = _as_q(v)
        return cls(n, m, ent)

    @classmethod
    def identity(cls, n: int) -> "SparseMatrix":
        return cls(n, n, {(i, i): Q(1) for i in range(n)})

    @classmethod
    def zero(cls, rows: int, cols: int) -> "SparseMatrix":
        return cls(rows, cols, {})

    def __eq__(self, other):
        return (
            isinstance(other, SparseMatrix)
            and self.rows == other.rows
            and self.cols == other.cols
            and self.entries == other.entries
        )

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.rows, self.cols, frozenset(self.entries.items())))
        return self._hash

    def __repr__(self):
        return f"SparseMatrix({self.rows}x{self.cols}, nnz={len(self.entries)})"

    def get(self, i: int, j: int) -> Q:
        return self.entries.get((i, j), Q(0))

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix(self.cols, self.rows, {(j, i): v for (i, j), v in self.entries.items()})

    def matvec(self, v: List[Q]) -> List[Q]:
        if len(v) != self.cols:
            raise ValueError("dimension mismatch")
        out = [Q(0)] * self.rows
        for (i, j), a in self.entries.items():
            if v[j]:
                out[i] += a * v[j]
        return out

    def matmul(self, other: "SparseMatrix") -> "SparseMatrix":
        if self.cols != other.rows:
            raise ValueError("dimension mismatch")
        by_row: Dict[int, List[Tuple[int, Q]]] = {}
        for (i, j), a in other.entries.items():
            by_row.setdefault(i, []).append((j, a))
        acc: Dict[Tuple[int, int], Q] = {}
        for (i, k), a in self.entries.items():
            for j, b in by_row.get(k, ()):  # noqa: B905
                key = (i, j)
                acc[key] = acc.get(key, Q(0)) + a * b
        return SparseMatrix(self.rows, other.cols, acc)

    def is_zero(self) -> bool:
        return not self.entries

    def to_dense(self) -> List[List[Q]]:
        out = [[Q(0)] * self.cols for _ in range(self.rows)]
        for (i, j), v in self.entries.items():
            out[i][j] = v
        return out

    def _row_major(self) -> List[Dict[int, Q]]:
        rows: List[Dict[int, Q]] = [dict() for _ in range(self.rows)]
        for (i, j), v in self.entries.items():
            rows[i][j] = v
        return rows


def _eliminate(m: SparseMatrix, pivot_col_limit: Optional[int] = None
               ) -> Tuple[List[Dict[int, Q]], List[int], List[Dict[int, Q]]]:
    """Sparse Gaussian elimination with Markowitz-style pivoting.

    Returns (echelon rows, pivot columns, leftover rows supported only on
    columns >= pivot_col_limit).  The pivot choice minimizes
    (nnz(row)-1)*(nnz(col)-1) to limit fill-in; graph-complex differentials
    are extremely sparse so this dominates runtime.
    """
    limit = pivot_col_limit if pivot_col_limit is not None else m.cols
    rows = [r for r in m._row_major() if r]
    pivots: List[int] = []
    echelon: List[Dict[int, Q]] = []
    leftovers: List[Dict[int, Q]] = []
    while rows:
        active = []
        for r in rows:
            if all(j >= limit for j in r):
                leftovers.append(r)
            else:
                active.append(r)
        rows = active
        if not rows:
            break
        col_count: Dict[int, int] = {}
        for r in rows:
            for j in r:
                col_count[j] = col_count.get(j, 0) + 1
        best_ri = -1
        best_j = -1
        best_cost = None
        for ri, r in enumerate(rows):
            rl = len(r) - 1
            for j in r:
                if j >= limit:
                    continue
                cost = rl * (col_count[j] - 1)
                if best_cost is None or cost < best_cost or (cost == best_cost and (j, ri) < (best_j, best_ri)):
                    best_ri, best_j, best_cost = ri, j, cost
            if best_cost == 0:
                break
        prow = rows.pop(best_ri)
        pj = best_j
        pv = prow[pj]
        prow = {j: v / pv for j, v in prow.items()}
        pivots.append(pj)
        echelon.append(prow)
        nxt = []
        for r in rows:
            if pj in r:
                f = r[pj]
                for j, v in prow.items():
                    nv = r.get(j, Q(0)) - f * v
                    if nv:
                        r[j] = nv
                    else:
                        r.pop(j, None)
            if r:
                nxt.append(r)
        rows = nxt
    return echelon, pivots, leftovers


def rank(m: SparseMatrix) -> int:
    """Rank of m over Q, by exact sparse elimination."""
    _, pivots, _ = _eliminate(m)
    return len(pivots)


def _back_reduce(echelon: List[Dict[int, Q]], pivots: List[int]) -> List[Dict[int, Q]]:
    """Gauss-Jordan cleanup: each pivot column is eliminated from every other
    row.  Markowitz pivoting does not order pivots by column, so rows chosen
    earlier may still hold entries in later pivots' columns; processing pivot
    columns in decreasing order keeps cleaned columns clean."""
    order = sorted(range(len(pivots)), key=lambda k: -pivots[k])
    for ra in order:
        pa = pivots[ra]
        for rb in range(len(echelon)):
            if rb == ra:
                continue
            f = echelon[rb].get(pa)
            if f:
                for j, v in echelon[ra].items():
                    nv = echelon[rb].get(j, Q(0)) - f * v
                    if nv:
                        echelon[rb][j] = nv
                    else:
                        echelon[rb].pop(j, None)
    return echelon


def kernel_basis(m: SparseMatrix) -> List[List[Q]]:
    """Basis of ker(m); length is cols - rank(m); each v satisfies m v = 0."""
    echelon, pivots, _ = _eliminate(m)
    echelon = _back_reduce(echelon, pivots)
    pivot_set = set(pivots)
    free_cols = [j for j in range(m.cols) if j not in pivot_set]
    piv_of_col = {pivots[k]: k for k in range(len(pivots))}
    basis = []
    for f in free_cols:
        v = [Q(0)] * m.cols
        v[f] = Q(1)
        for pj, k in piv_of_col.items():
            c = echelon[k].get(f)
            if c:
                v[pj] = -c
        basis.append(v)
    return basis


def in_image(m: SparseMatrix, b: List[Q]) -> Optional[List[Q]]:
    """A solution x of m x = b, or None if the system is inconsistent."""
    if len(b) != m.rows:
        raise ValueError("right-hand side has wrong length")
    aug_entries = dict(m.entries)
    for i, v in enumerate(b):
        v = _as_q(v)
        if v:
            aug_entries[(i, m.cols)] = v
    aug = SparseMatrix(m.rows, m.cols + 1, aug_entries)
    echelon, pivots, leftovers = _eliminate(aug, pivot_col_limit=m.cols)
    if leftovers:
        return None  # a row reduced to (0 ... 0 | c) with c != 0
    echelon = _back_reduce(echelon, pivots)
    x = [Q(0)] * m.cols
    for k, pj in enumerate(pivots):
        x[pj] = echelon[k].get(m.cols, Q(0))
    return x


def betti_at(d_in: SparseMatrix, d_out: SparseMatrix) -> int:
    """dim ker(d_out) - rank(d_in) for a three-term piece of a cochain complex.

    Raises CompositionNonzero unless d_out . d_in = 0 exactly.
    """
    if d_in.rows != d_out.cols:
        raise ValueError(f"shape mismatch: d_in is ...x{d_in.rows}->, d_out has {d_out.cols} columns")
    if not d_out.matmul(d_in).is_zero():
        raise CompositionNonzero("d_out . d_in != 0; the complex is inconsistent")
    return (d_out.cols - rank(d_out)) - rank(d_in)


class BettiTable:
    """Map (cohomological degree, loop order) -> dimension >= 0."""

    def __init__(self, data: Optional[Mapping[Tuple[int, int], int]] = None):
        self._data: Dict[Tuple[int, int], int] = {}
        for k, v in (data or {}).items():
            self.set(k[0], k[1], v)

    def set(self, degree: int, loop_order: int, dim: int) -> None:
        if dim < 0:
            raise ValueError("negative dimension")
        if dim:
            self._data[(degree, loop_order)] = dim
        else:
            self._data.pop((degree, loop_order), None)

    def get(self, degree: int, loop_order: int) -> int:
        return self._data.get((degree, loop_order), 0)

    def items(self):
        return sorted(self._data.items())

    def by_degree(self) -> Dict[int, int]:
        out: Dict[int, int] = {}
        for (d, _l), v in self._data.items():
            out[d] = out.get(d, 0) + v
        return out

    def total(self) -> int:
        return sum(self._data.values())

    def __eq__(self, other):
        return isinstance(other, BettiTable) and self._data == other._data

    def __repr__(self):
        return f"BettiTable({dict(self.items())})"

    def to_json(self) -> list:
        return [
            {"degree": d, "loop_order": l, "dim": v} for (d, l), v in self.items()
        ]

    @classmethod
    def from_json(cls, rows: list) -> "BettiTable":
        t = cls()
        for r in rows:
            t.set(r["degree"], r["loop_order"], r["dim"])
        return t

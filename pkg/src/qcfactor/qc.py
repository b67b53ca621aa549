"""Circulant-based parity-check matrices: compact exponent form, binary
expansion, and the two text interchange formats (alist and exponent).

An exponent matrix stores, for every block cell, a *set* of cyclic shifts.
The empty set encodes a zero block; sets with more than one shift encode
multi-edge cells (sums of several circulant permutation matrices).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import IO, Sequence

import numpy as np

from .errors import DomainError, ParseError

ShiftCell = frozenset[int]


@dataclass(frozen=True)
class SparseBinaryMatrix:
    """Row-major sparse 0/1 matrix.

    ``rows[i]`` is the strictly increasing tuple of column indices that
    hold a one in row ``i``.
    """

    nrows: int
    ncols: int
    rows: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.nrows < 0 or self.ncols < 0:
            raise DomainError("matrix dimensions must be non-negative")
        if len(self.rows) != self.nrows:
            raise DomainError("row list length does not match nrows")
        for r, cols in enumerate(self.rows):
            if any(c < 0 or c >= self.ncols for c in cols):
                raise DomainError(f"row {r}: column index out of range")
            if any(cols[k] >= cols[k + 1] for k in range(len(cols) - 1)):
                raise DomainError(f"row {r}: columns not strictly increasing")

    @cached_property
    def nnz(self) -> int:
        return sum(len(r) for r in self.rows)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.nrows, self.ncols), dtype=np.int8)
        for i, cols in enumerate(self.rows):
            out[i, list(cols)] = 1
        return out

    @classmethod
    def from_dense(cls, a) -> "SparseBinaryMatrix":
        a = np.asarray(a)
        if a.ndim != 2:
            raise DomainError("expected a 2-d array")
        rows = tuple(tuple(int(c) for c in np.nonzero(a[i])[0]) for i in range(a.shape[0]))
        return cls(a.shape[0], a.shape[1], rows)

    def transpose(self) -> "SparseBinaryMatrix":
        cols: list[list[int]] = [[] for _ in range(self.ncols)]
        for i, row in enumerate(self.rows):
            for c in row:
                cols[c].append(i)
        return SparseBinaryMatrix(self.ncols, self.nrows, tuple(tuple(c) for c in cols))

    def row_weights(self) -> tuple[int, ...]:
        return tuple(len(r) for r in self.rows)

    def col_weights(self) -> tuple[int, ...]:
        w = [0] * self.ncols
        for row in self.rows:
            for c in row:
                w[c] += 1
        return tuple(w)


@dataclass(frozen=True)
class ExponentMatrix:
    """Shift-set matrix plus circulant size ``L``.

    Shifts must already lie in ``[0, L)``; out-of-range values are
    rejected rather than wrapped so that caller bugs surface early.
    """

    rows: int
    cols: int
    L: int
    cells: tuple[tuple[ShiftCell, ...], ...]

    def __post_init__(self):
        if self.L < 1 or self.rows < 1 or self.cols < 1:
            raise DomainError("rows, cols and L must all be >= 1")
        if len(self.cells) != self.rows or any(len(r) != self.cols for r in self.cells):
            raise DomainError("cell grid does not match declared shape")
        for i, row in enumerate(self.cells):
            for j, cell in enumerate(row):
                for s in cell:
                    if not (0 <= s < self.L):
                        raise DomainError(f"cell ({i},{j}): shift {s} outside [0, {self.L})")

    @classmethod
    def from_lists(cls, cells: Sequence[Sequence], L: int) -> "ExponentMatrix":
        """Build from nested lists; each entry may be an int, an iterable of
        ints, or None/empty for a zero block."""
        grid = []
        for row in cells:
            out_row = []
            for cell in row:
                if cell is None:
                    out_row.append(frozenset())
                elif isinstance(cell, int):
                    out_row.append(frozenset({cell}))
                else:
                    out_row.append(frozenset(int(s) for s in cell))
            grid.append(tuple(out_row))
        return cls(len(grid), len(grid[0]), L, tuple(grid))

    def cell(self, i: int, j: int) -> ShiftCell:
        return self.cells[i][j]

    @property
    def nnz_shifts(self) -> int:
        return sum(len(c) for row in self.cells for c in row)

    def row_shift_sums(self) -> tuple[int, ...]:
        return tuple(sum(sum(c) for c in row) for row in self.cells)

    def col_shift_sums(self) -> tuple[int, ...]:
        sums = [0] * self.cols
        for row in self.cells:
            for j, c in enumerate(row):
                sums[j] += sum(c)
        return tuple(sums)


@dataclass(frozen=True)
class Protograph:
    """0/1 base matrix marking the non-empty blocks of an exponent matrix."""

    cells: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        for row in self.cells:
            if any(v not in (0, 1) for v in row):
                raise DomainError("protograph entries must be 0 or 1")

    def to_dense(self) -> np.ndarray:
        return np.array(self.cells, dtype=np.int8)


def circulant(shift: int, L: int) -> SparseBinaryMatrix:
    """L x L circulant permutation matrix with ones at (i, i+shift mod L)."""
    if L < 1:
        raise DomainError(f"circulant size must be >= 1, got {L}")
    if not (0 <= shift < L):
        raise DomainError(f"shift {shift} outside [0, {L})")
    return SparseBinaryMatrix(L, L, tuple(((i + shift) % L,) for i in range(L)))


def expand(E: ExponentMatrix) -> SparseBinaryMatrix:
    """Expand the exponent matrix to its (m*L) x (n*L) binary form."""
    L = E.L
    rows: list[tuple[int, ...]] = []
    for bi in range(E.rows):
        for r in range(L):
            cols: list[int] = []
            for bj in range(E.cols):
                base = bj * L
                for s in E.cells[bi][bj]:
                    cols.append(base + (r + s) % L)
            rows.append(tuple(sorted(cols)))
    return SparseBinaryMatrix(E.rows * L, E.cols * L, tuple(rows))


def protograph_of(E: ExponentMatrix) -> Protograph:
    """0/1 base matrix: one exactly where a cell is non-empty."""
    return Protograph(tuple(tuple(1 if cell else 0 for cell in row) for row in E.cells))


# ---------------------------------------------------------------------------
# alist interchange format
# ---------------------------------------------------------------------------

def write_alist(H: SparseBinaryMatrix, sink: IO[str]) -> None:
    """Write in alist layout: ``n m``, max degrees, per-column and per-row
    degree lists, then 1-indexed adjacency lists (columns first)."""
    cols = H.transpose()
    col_degs = cols.row_weights()
    row_degs = H.row_weights()
    sink.write(f"{H.ncols} {H.nrows}\n")
    sink.write(f"{max(col_degs, default=0)} {max(row_degs, default=0)}\n")
    sink.write(" ".join(str(d) for d in col_degs) + "\n")
    sink.write(" ".join(str(d) for d in row_degs) + "\n")
    for adj in cols.rows:
        sink.write(" ".join(str(i + 1) for i in adj) + "\n")
    for adj in H.rows:
        sink.write(" ".join(str(j + 1) for j in adj) + "\n")


def read_alist(source: IO[str]) -> SparseBinaryMatrix:
    lines = source.read().splitlines()

    def ints(lineno: int) -> list[int]:
        if lineno >= len(lines):
            raise ParseError(f"line {lineno + 1}: unexpected end of file")
        try:
            return [int(tok) for tok in lines[lineno].split()]
        except ValueError as exc:
            raise ParseError(f"line {lineno + 1}: non-integer token") from exc

    header = ints(0)
    if len(header) != 2:
        raise ParseError("line 1: expected 'n m'")
    n, m = header
    if n < 0 or m < 0:
        raise ParseError("line 1: negative dimension")
    maxdeg = ints(1)
    if len(maxdeg) != 2:
        raise ParseError("line 2: expected 'max_col_deg max_row_deg'")
    col_degs = ints(2)
    row_degs = ints(3)
    if len(col_degs) != n:
        raise ParseError(f"line 3: expected {n} column degrees, got {len(col_degs)}")
    if len(row_degs) != m:
        raise ParseError(f"line 4: expected {m} row degrees, got {len(row_degs)}")

    col_adj = []
    for j in range(n):
        adj = [v for v in ints(4 + j) if v != 0]
        if len(adj) != col_degs[j]:
            raise ParseError(f"line {5 + j}: column {j + 1} degree mismatch")
        if any(v < 1 or v > m for v in adj):
            raise ParseError(f"line {5 + j}: row index out of range")
        col_adj.append(adj)
    rows: list[list[int]] = [[] for _ in range(m)]
    for i in range(m):
        adj = [v for v in ints(4 + n + i) if v != 0]
        if len(adj) != row_degs[i]:
            raise ParseError(f"line {5 + n + i}: row {i + 1} degree mismatch")
        if any(v < 1 or v > n for v in adj):
            raise ParseError(f"line {5 + n + i}: column index out of range")
        rows[i] = sorted(v - 1 for v in adj)
    H = SparseBinaryMatrix(m, n, tuple(tuple(r) for r in rows))
    # cross-check the two adjacency blocks against each other
    cols = H.transpose()
    if tuple(tuple(v - 1 for v in sorted(a)) for a in col_adj) != cols.rows:
        raise ParseError("column and row adjacency lists are inconsistent")
    return H


# ---------------------------------------------------------------------------
# exponent-matrix text format
# ---------------------------------------------------------------------------

def write_exponent(E: ExponentMatrix, sink: IO[str]) -> None:
    """Header ``m n L``, then m lines of n cells; a cell is '-' (zero block)
    or comma-joined shifts."""
    sink.write(f"{E.rows} {E.cols} {E.L}\n")
    for row in E.cells:
        toks = []
        for cell in row:
            toks.append(",".join(str(s) for s in sorted(cell)) if cell else "-")
        sink.write(" ".join(toks) + "\n")


def read_exponent(source: IO[str]) -> ExponentMatrix:
    lines = [ln for ln in source.read().splitlines()]
    if not lines:
        raise ParseError("line 1: empty input")
    head = lines[0].split()
    if len(head) != 3:
        raise ParseError("line 1: expected 'm n L'")
    try:
        m, n, L = (int(t) for t in head)
    except ValueError as exc:
        raise ParseError("line 1: non-integer header") from exc
    if m < 1 or n < 1 or L < 1:
        raise ParseError("line 1: dimensions must be >= 1")
    if len(lines) < 1 + m:
        raise ParseError(f"expected {m} cell rows, got {len(lines) - 1}")
    grid = []
    for i in range(m):
        toks = lines[1 + i].split()
        if len(toks) != n:
            raise ParseError(f"line {2 + i}: expected {n} cells, got {len(toks)}")
        row = []
        for j, tok in enumerate(toks):
            if tok == "-":
                row.append(frozenset())
                continue
            try:
                shifts = frozenset(int(p) for p in tok.split(","))
            except ValueError as exc:
                raise ParseError(f"line {2 + i}: bad cell '{tok}'") from exc
            for s in shifts:
                if not (0 <= s < L):
                    raise ParseError(f"line {2 + i}: shift {s} outside [0, {L})")
            row.append(shifts)
        grid.append(tuple(row))
    return ExponentMatrix(m, n, L, tuple(grid))

"""Maps from Ising ground-state particle configurations to quasi-cyclic
exponent matrices: pairwise circulant ground states, LCM row combining,
toroidal cells, radial collapse, and the shift-sum cycle gauge."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import ConstructionError, DomainError
from .qc import ExponentMatrix


@dataclass(frozen=True)
class ParticleConfig:
    """Integer-scaled particle positions with positive integer charges."""

    dim: int
    positions: tuple[tuple[int, ...], ...]
    charges: tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise DomainError("dim must be 1 or 2")
        if len(set(self.positions)) != len(self.positions):
            raise DomainError("particle positions must be distinct")
        if any(len(p) != self.dim for p in self.positions):
            raise DomainError("position arity does not match dim")
        if len(self.charges) != len(self.positions):
            raise DomainError("one charge per particle required")
        if any(q < 1 for q in self.charges):
            raise DomainError("charges must be positive integers")

    def axis_projections(self, axis: int) -> tuple[int, ...]:
        if not (0 <= axis < self.dim):
            raise DomainError("axis out of range")
        return tuple(p[axis] for p in self.positions)


@dataclass(frozen=True)
class GroundStateSet:
    """Reduced set of circulant shift pairs balancing a two-field system."""

    e: int
    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        for n1, n3 in self.pairs:
            if not (1 <= n1 <= self.e - 1 and 1 <= n3 <= self.e - 1):
                raise DomainError("pair shifts must lie in [1, e-1]")
            if (n1 + n3) % self.e != 0:
                raise DomainError("pair does not sum to 0 mod e")


def pair_ground_states(R1: int, R3: int) -> GroundStateSet:
    """All interior shift pairs (n1, e-n1) for e = R1 + R3.

    Boundary pairs containing a zero-equivalent shift are removed, so the
    set is closed under the swap (n1, n3) -> (n3, n1).
    """
    if R1 < 1 or R3 < 1:
        raise DomainError("squared distances must be positive integers")
    e = R1 + R3
    pairs = tuple((n1, e - n1) for n1 in range(1, e))
    return GroundStateSet(e, pairs)


def lcm_combine(rows: Sequence[tuple[Sequence[int], int]]) -> tuple[tuple[int, ...], int]:
    """Rescale several circulant rows of different sizes onto LCM size.

    Each shift s over size l maps to s * L' / l with L' the LCM of all row
    sizes; rows are concatenated in order.  Normalised shifts s/l are
    preserved exactly.
    """
    if not rows:
        raise DomainError("need at least one row")
    sizes = []
    for shifts, l in rows:
        if l < 1:
            raise DomainError("circulant size must be >= 1")
        if any(not (0 <= s < l) for s in shifts):
            raise DomainError("shift outside its row's circulant size")
        sizes.append(l)
    big = math.lcm(*sizes)
    out: list[int] = []
    for shifts, l in rows:
        scale = big // l
        out.extend(s * scale for s in shifts)
    return tuple(out), big


def toroidal_cell(xs: Sequence[int], ys: Sequence[int]) -> ExponentMatrix:
    """Two-row exponent matrix for a planar cell: one circulant row per axis.

    Row sizes are the per-axis projection sums; both rows are rescaled to
    their LCM.  Normalised shifts are invariant under common rescaling of
    all projections.
    """
    if len(xs) != len(ys) or not xs:
        raise DomainError("xs and ys must be equal-length, non-empty")
    if any(p < 1 for p in xs) or any(p < 1 for p in ys):
        raise DomainError("projections must be positive integers")
    Lx, Ly = sum(xs), sum(ys)
    L = math.lcm(Lx, Ly)
    # a projection equal to the whole axis total wraps to the identity
    row_x = tuple(p * (L // Lx) % L for p in xs)
    row_y = tuple(p * (L // Ly) % L for p in ys)
    return ExponentMatrix.from_lists([list(row_x), list(row_y)], L)


def collapse_radial(E: ExponentMatrix, radial_row: int = 0) -> ExponentMatrix:
    """Collapse an exponent matrix along its radial row.

    The n block columns merge into a single column: every non-radial row
    becomes one multi-edge cell holding all of its shifts, and the radial
    row becomes the periodic identity-block pattern {0, b, 2b, ...} with
    block size b = L / n (the first b binary rows of that cell are the
    row of I_b blocks).
    """
    if not (0 <= radial_row < E.rows):
        raise DomainError("radial_row out of range")
    n = E.cols
    if E.L % n != 0:
        raise DomainError(f"L={E.L} not divisible by column count {n}")
    b = E.L // n
    cells = []
    for i in range(E.rows):
        row_cells = E.cells[i]
        if any(not c for c in row_cells):
            raise DomainError(f"row {i} has an empty cell; cannot collapse")
        if i == radial_row:
            if any(len(c) != 1 for c in row_cells):
                raise DomainError("radial row must contain single-shift cells")
            merged = frozenset(k * b for k in range(n))
        else:
            merged = frozenset().union(*row_cells)
            if len(merged) != sum(len(c) for c in row_cells):
                raise DomainError(f"row {i} repeats a shift; collapse would lose edges")
        cells.append((merged,))
    return ExponentMatrix(E.rows, 1, E.L, tuple(cells))


@dataclass(frozen=True)
class GaugeReport:
    modulus: int
    rows: tuple[bool, ...]
    cols: tuple[bool, ...]

    @property
    def all_rows(self) -> bool:
        return all(self.rows)

    @property
    def all_cols(self) -> bool:
        return all(self.cols)


def shbf_gauge_check(E: ExponentMatrix, modulus: int | None = None) -> GaugeReport:
    """Row/column shift-sum divisibility report.

    A row (column) passes when the sum of all its shifts is a multiple of
    the modulus (default: the circulant size).
    """
    mod = E.L if modulus is None else modulus
    if mod < 1:
        raise DomainError("modulus must be >= 1")
    rows = tuple(s % mod == 0 for s in E.row_shift_sums())
    cols = tuple(s % mod == 0 for s in E.col_shift_sums())
    return GaugeReport(mod, rows, cols)


def spherical_shell_matrix(radii: Sequence[int], seed: int = 0) -> ExponentMatrix:
    """Three-row (radius, azimuth, inclination) exponent matrix for particles
    on spherical shells.

    The circulant size k is the smallest integer divisible by every distinct
    radius, by the total of the radius multiset, and by the particle count
    (so whole-row shifts of k/N preserve the gauge).  The radial row uses
    shifts c * r_i with the largest feasible common factor c; the angular
    rows are arithmetic progressions whose start is advanced until the row
    gauge holds.  Deterministic per seed.
    """
    radii = tuple(int(r) for r in radii)
    if not radii or any(r < 1 for r in radii):
        raise DomainError("radii must be positive integers")
    N = len(radii)
    total = sum(radii)
    distinct = sorted(set(radii))
    k = math.lcm(*distinct, total, N)
    if k > 10**7:
        raise ConstructionError(f"admissible circulant size {k} exceeds the search cap")

    rmax = max(radii)
    # prefer c = k / (rmax + 1): reproduces the published shell matrices
    c = 0
    cand = k // (rmax + 1) if k % (rmax + 1) == 0 else 0
    if cand and cand * rmax < k and (cand * total) % k == 0:
        c = cand
    else:
        for c_try in range((k - 1) // rmax, 0, -1):
            if (c_try * total) % k == 0:
                c = c_try
                break
    radial = [c * r for r in radii]

    step = (2 * k) // total if (2 * k) % total == 0 else max(1, k // N)
    rows = [radial]
    rng_offset = seed % k
    used_starts: set[int] = set()

    def find_start(offset: int, skip_used: bool):
        for a in range(offset, offset + k):
            a_mod = a % k
            if skip_used and a_mod in used_starts:
                continue
            shifts = [(a_mod + t * step) % k for t in range(N)]
            if sum(shifts) % k == 0:
                return a_mod, shifts
        return None, None

    for _angular in range(2):
        start, row = find_start(rng_offset, True)
        if start is None:
            start, row = find_start(rng_offset, False)
        if start is None:
            raise ConstructionError("no gauge-satisfying progression start found")
        used_starts.add(start)
        rows.append(row)
        rng_offset = (start + 1) % k

    return ExponentMatrix.from_lists([list(r) for r in rows], k)

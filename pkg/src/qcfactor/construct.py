"""Sparse parity-check / mask construction: PEG with ACE tie-breaking,
simulated annealing over exponent matrices, the Chord sparsity pattern,
and a fixture atlas of published matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConstructionError, DomainError
from .qc import ExponentMatrix, SparseBinaryMatrix, expand


@dataclass(frozen=True)
class PegConfig:
    n: int
    m: int
    col_degrees: tuple[int, ...]
    seed: int = 0
    ace_depth: int = 16

    def __post_init__(self):
        if len(self.col_degrees) != self.n:
            raise DomainError("col_degrees length must equal n")
        if any(d < 1 for d in self.col_degrees):
            raise DomainError("column degrees must be >= 1")
        if sum(self.col_degrees) > self.n * self.m:
            raise DomainError("degree sequence exceeds matrix capacity")


def peg_ace(cfg: PegConfig) -> SparseBinaryMatrix:
    """Progressive edge growth, column by column.

    Each edge goes to the check at maximal BFS distance from the column
    (unreachable checks count as infinitely far: no new cycle).  Ties are
    broken by the ACE of the shortest cycle the edge would close (larger
    first), then lowest current check degree, then lowest check index.
    Placement is a deterministic function of the config; the seed is kept
    for manifests only.
    """
    n, m = cfg.n, cfg.m
    if any(d > m for d in cfg.col_degrees):
        raise ConstructionError("column degree exceeds number of checks")
    vn_adj: list[list[int]] = [[] for _ in range(n)]
    cn_adj: list[list[int]] = [[] for _ in range(m)]
    cn_deg = [0] * m
    INF = math.inf

    def bfs(v: int) -> tuple[list[float], list[float]]:
        """(distance v -> each check, min path ACE among shortest paths)."""
        distc = [INF] * m
        acec = [INF] * m
        distv = [INF] * n
        acev = [INF] * n
        distv[v] = 0
        acev[v] = (len(vn_adj[v]) + 1) - 2  # prospective degree of v
        frontier = [v]
        for _ in range(cfg.ace_depth):
            if not frontier:
                break
            next_checks: list[int] = []
            for u in frontier:
                for c in vn_adj[u]:
                    nd = distv[u] + 1
                    if distc[c] > nd:
                        distc[c] = nd
                        acec[c] = acev[u]
                        next_checks.append(c)
                    elif distc[c] == nd and acev[u] < acec[c]:
                        acec[c] = acev[u]
            frontier = []
            for c in next_checks:
                for w in cn_adj[c]:
                    nd = distc[c] + 1
                    na = acec[c] + len(vn_adj[w]) - 2
                    if distv[w] > nd:
                        distv[w] = nd
                        acev[w] = na
                        frontier.append(w)
                    elif distv[w] == nd and na < acev[w]:
                        acev[w] = na
        return distc, acec

    for v in range(n):
        for _edge in range(cfg.col_degrees[v]):
            distc, acec = bfs(v)
            best_key = None
            best_c = None
            for c in range(m):
                if c in vn_adj[v]:
                    continue
                if distc[c] == INF:
                    key = (-INF, 0.0, cn_deg[c], c)  # closes no cycle: best class
                else:
                    # edge closes a cycle of length distc[c] + 1
                    key = (-(distc[c] + 1.0), -acec[c], cn_deg[c], c)
                if best_key is None or key < best_key:
                    best_key = key
                    best_c = c
            if best_c is None:
                raise ConstructionError(f"no check available for column {v}")
            vn_adj[v].append(best_c)
            cn_adj[best_c].append(v)
            cn_deg[best_c] += 1

    rows = tuple(tuple(sorted(cn_adj[i])) for i in range(m))
    return SparseBinaryMatrix(m, n, rows)


# ---------------------------------------------------------------------------
# simulated annealing over exponent matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SaConfig:
    proto_rows: int
    proto_cols: int
    L: int
    target_girth: int = 6
    t0: float = 1.0
    cooling: float = 0.995
    steps: int = 2000
    seed: int = 0
    cell_weights: tuple[tuple[int, ...], ...] | None = None
    stop_at_target: bool = False

    def __post_init__(self):
        if not (0.0 < self.cooling < 1.0):
            raise DomainError("cooling must be in (0, 1)")
        if self.steps < 1:
            raise DomainError("steps must be >= 1")
        if self.target_girth < 4 or self.target_girth % 2 != 0:
            raise DomainError("target_girth must be an even integer >= 4")
        if self.cell_weights is not None:
            if len(self.cell_weights) != self.proto_rows or any(
                len(r) != self.proto_cols for r in self.cell_weights
            ):
                raise DomainError("cell_weights shape mismatch")
            if any(w < 0 for r in self.cell_weights for w in r):
                raise DomainError("cell weights must be >= 0")
            if any(w > self.L for r in self.cell_weights for w in r):
                raise DomainError("cell weight cannot exceed L")

    def weights(self) -> tuple[tuple[int, ...], ...]:
        if self.cell_weights is not None:
            return self.cell_weights
        return tuple(tuple(1 for _ in range(self.proto_cols)) for _ in range(self.proto_rows))


@dataclass(frozen=True)
class SaResult:
    exponent: ExponentMatrix
    energy: float
    violations: int
    met_target: bool
    energy_trace: tuple[float, ...]


class _EnumBudget(Exception):
    pass


def _closed_walk_templates(weights, max_len: int, node_budget: int = 2_000_000):
    """Signed slot-incidence vectors of closed non-backtracking alternating
    walks up to max_len on the base multigraph.

    Slots are (row, col, k) with k < weight(row, col); a template maps a
    walk to the vector t with t[slot] += sign.  A shift assignment closes
    the walk iff t . shifts == 0 (mod L).  If the enumeration exceeds the
    node budget the walk length cap is lowered by 2 and retried.
    """
    m = len(weights)
    n = len(weights[0])
    slots = [(i, j, k) for i in range(m) for j in range(n) for k in range(weights[i][j])]
    by_row: dict[int, list[int]] = {}
    by_col: dict[int, list[int]] = {}
    for q, (i, j, _) in enumerate(slots):
        by_row.setdefault(i, []).append(q)
        by_col.setdefault(j, []).append(q)

    def canon(vec: tuple[int, ...]) -> tuple[int, ...]:
        neg = tuple(-x for x in vec)
        return min(vec, neg)

    def attempt(cap: int):
        templates: dict[int, set[tuple[int, ...]]] = {l: set() for l in range(4, cap + 1, 2)}
        visited = 0

        def dfs(start: int, at_col: bool, node: int, last: int, vec: list[int], steps: int):
            nonlocal visited
            if steps >= cap:
                return
            visited += 1
            if visited > node_budget:
                raise _EnumBudget
            sign = -1 if at_col else 1
            cands = by_col[node] if at_col else by_row[node]
            si = slots[start][0]
            for nxt in cands:
                if nxt == last:
                    continue
                i2, j2, _ = slots[nxt]
                vec[nxt] += sign
                if not at_col:
                    dfs(start, True, j2, nxt, vec, steps + 1)
                else:
                    if i2 == si and steps + 1 >= 4 and nxt != start:
                        templates[steps + 1].add(canon(tuple(vec)))
                    dfs(start, False, i2, nxt, vec, steps + 1)
                vec[nxt] -= sign

        for start in range(len(slots)):
            sj = slots[start][1]
            vec = [0] * len(slots)
            vec[start] = 1
            dfs(start, True, sj, start, vec, 1)
            vec[start] = 0
        return templates

    cap = max_len
    while True:
        try:
            templates = attempt(cap)
            break
        except _EnumBudget:
            if cap <= 4:
                raise ConstructionError("cycle-template enumeration exceeds budget even at length 4")
            cap -= 2

    out = {}
    for l, vs in templates.items():
        if vs:
            out[l] = np.array(sorted(vs), dtype=np.int64)
    return slots, out


def sa_emd(cfg: SaConfig) -> SaResult:
    """Anneal shift assignments on a fixed protograph.

    State: one shift per slot.  Move: re-randomise a single slot's shift.
    Energy is a weighted scalarisation of (count of closed chains shorter
    than target_girth that satisfy the cycle condition, count of chains at
    target_girth, negated block-level ACE mass of those chains).  Metropolis
    acceptance with geometric cooling; the best state visited is returned
    and its energy trace is non-increasing.
    """
    weights = cfg.weights()
    if all(w == 0 for row in weights for w in row):
        raise DomainError("protograph has no edges")
    rng = np.random.default_rng(cfg.seed)
    max_len = cfg.target_girth + 2
    slots, templates = _closed_walk_templates(weights, max_len)
    # drop the tie-break level if the template count is impractical
    total_rows = sum(v.shape[0] for v in templates.values())
    if total_rows > 200_000 and max_len in templates:
        templates = {l: v for l, v in templates.items() if l < max_len}

    short_mats = [templates[l] for l in sorted(templates) if l < cfg.target_girth]
    tg_mats = [templates[l] for l in sorted(templates) if l >= cfg.target_girth]
    col_weight = [0] * len(slots)
    for q, (_, j, _) in enumerate(slots):
        col_weight[q] = sum(weights[i][j] for i in range(cfg.proto_rows))
    ace_of_slot = np.array([col_weight[q] - 2 for q in range(len(slots))], dtype=np.float64)

    def draw_state() -> np.ndarray:
        shifts = np.zeros(len(slots), dtype=np.int64)
        pos = 0
        for i in range(cfg.proto_rows):
            for j in range(cfg.proto_cols):
                w = weights[i][j]
                if w:
                    if w > cfg.L:
                        raise DomainError("cell weight exceeds L")
                    shifts[pos : pos + w] = rng.choice(cfg.L, size=w, replace=False)
                    pos += w
        return shifts

    def energy(shifts: np.ndarray) -> tuple[float, int]:
        violations = 0
        for mat in short_mats:
            violations += int(np.count_nonzero((mat @ shifts) % cfg.L == 0))
        at_tg = 0
        ace_mass = 0.0
        for mat in tg_mats:
            hit = (mat @ shifts) % cfg.L == 0
            k = int(np.count_nonzero(hit))
            at_tg += k
            if k:
                ace_mass += float((np.abs(mat[hit]).astype(np.float64) @ ace_of_slot).sum())
        return violations * 1e6 + at_tg * 1e3 - 1e-3 * ace_mass, violations

    def slot_bounds():
        bounds = []
        pos = 0
        for i in range(cfg.proto_rows):
            for j in range(cfg.proto_cols):
                w = weights[i][j]
                for k in range(w):
                    bounds.append((pos, pos + w))
                pos += w
        return bounds

    bounds = slot_bounds()
    shifts = draw_state()
    e, viol = energy(shifts)
    best = shifts.copy()
    best_e, best_viol = e, viol
    trace = [best_e]
    t = cfg.t0
    for _step in range(cfg.steps):
        if cfg.stop_at_target and best_viol == 0:
            break
        q = int(rng.integers(len(slots)))
        lo, hi = bounds[q]
        cell = shifts[lo:hi]
        old = shifts[q]
        taken = set(int(x) for x in cell) - {int(old)}
        choices = [s for s in range(cfg.L) if s not in taken and s != old]
        if not choices:
            continue
        shifts[q] = choices[int(rng.integers(len(choices)))]
        e2, viol2 = energy(shifts)
        accept = e2 <= e or rng.random() < math.exp(-(e2 - e) / max(t, 1e-12))
        if accept:
            e, viol = e2, viol2
            if e < best_e:
                best = shifts.copy()
                best_e, best_viol = e, viol
        else:
            shifts[q] = old
        trace.append(best_e)
        t *= cfg.cooling

    cells = []
    pos = 0
    for i in range(cfg.proto_rows):
        row = []
        for j in range(cfg.proto_cols):
            w = weights[i][j]
            row.append(frozenset(int(s) for s in best[pos : pos + w]))
            pos += w
        cells.append(tuple(row))
    E = ExponentMatrix(cfg.proto_rows, cfg.proto_cols, cfg.L, tuple(cells))
    return SaResult(E, best_e, best_viol, best_viol == 0, tuple(trace))


# ---------------------------------------------------------------------------
# square masks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Mask:
    matrix: SparseBinaryMatrix
    provenance: str

    def __post_init__(self):
        if self.matrix.nrows != self.matrix.ncols:
            raise DomainError("masks must be square")
        if self.provenance not in ("chord", "ldpc_peg", "qc_sa", "product"):
            raise DomainError(f"unknown provenance '{self.provenance}'")

    @property
    def n(self) -> int:
        return self.matrix.nrows

    @cached_property
    def nnz(self) -> int:
        return self.matrix.nnz


def chord_mask(N: int) -> Mask:
    """Row i holds ones at columns (i + 2^k) mod N, k = 0..log2(N)-1."""
    if N < 2 or N & (N - 1) != 0:
        raise DomainError(f"N must be a power of two >= 2, got {N}")
    p = N.bit_length() - 1
    rows = tuple(tuple(sorted({(i + (1 << k)) % N for k in range(p)})) for i in range(N))
    return Mask(SparseBinaryMatrix(N, N, rows), "chord")


def _with_diagonal(H: SparseBinaryMatrix) -> SparseBinaryMatrix:
    rows = []
    for i, row in enumerate(H.rows):
        rows.append(tuple(sorted(set(row) | {i})))
    return SparseBinaryMatrix(H.nrows, H.ncols, tuple(rows))


def square_ldpc_mask(N: int, degree: int | None = None, seed: int = 0) -> Mask:
    """PEG+ACE mask on an N x N rate-zero layout, diagonal topped up."""
    if degree is None:
        degree = math.ceil(math.log2(N))
    if degree * N > N * N:
        raise DomainError("degree exceeds matrix capacity")
    H = peg_ace(PegConfig(n=N, m=N, col_degrees=tuple([degree] * N), seed=seed))
    return Mask(_with_diagonal(H), "ldpc_peg")


def square_qc_mask(
    N: int,
    L: int,
    seed: int = 0,
    exponent: ExponentMatrix | None = None,
    target_girth: int = 6,
    steps: int = 2000,
) -> Mask:
    """SA-optimised QC mask expanded to N x N (diagonal topped up).

    When ``exponent`` is given it is expanded verbatim instead of running
    the annealer (used for the published instances).
    """
    if L < 1 or N % L != 0:
        raise DomainError(f"L={L} must divide N={N}")
    b = N // L
    if exponent is None:
        deg = max(1, math.ceil(math.log2(N))) if N > 1 else 1
        base, extra = divmod(deg, b)
        wrow = tuple(base + (1 if j < extra else 0) for j in range(b))
        weights = tuple(wrow for _ in range(b))
        res = sa_emd(
            SaConfig(
                proto_rows=b,
                proto_cols=b,
                L=L,
                target_girth=target_girth,
                steps=steps,
                seed=seed,
                cell_weights=weights,
                stop_at_target=True,
            )
        )
        exponent = res.exponent
    else:
        if exponent.rows != b or exponent.cols != b or exponent.L != L:
            raise DomainError("exponent matrix does not match N and L")
    return Mask(_with_diagonal(expand(exponent)), "qc_sa")


def product_mask(a: Mask, b: Mask) -> Mask:
    """Boolean product composition of two mask families."""
    if a.n != b.n:
        raise DomainError("mask sizes differ")
    pa = a.matrix.to_dense().astype(bool)
    pb = b.matrix.to_dense().astype(bool)
    return Mask(SparseBinaryMatrix.from_dense((pa @ pb)), "product")


def boolean_power_full(mask: Mask, times: int) -> bool:
    """True iff the `times`-fold boolean product has no structural zeros."""
    a = mask.matrix.to_dense().astype(bool)
    acc = a.copy()
    for _ in range(times - 1):
        acc = acc @ a
    return bool(acc.all())


# ---------------------------------------------------------------------------
# atlas of published fixtures
# ---------------------------------------------------------------------------

def _em(cells, L):
    return ExponentMatrix.from_lists(cells, L)


_ATLAS: dict[str, object] = {}


def _build_atlas():
    if _ATLAS:
        return
    _ATLAS["mega4"] = SparseBinaryMatrix.from_dense(np.triu(np.ones((4, 4), dtype=np.int8)))
    _ATLAS["h_eq1"] = SparseBinaryMatrix.from_dense(
        np.array(
            [
                [1, 0, 1, 1, 1],
                [1, 1, 0, 0, 0],
                [0, 1, 1, 1, 1],
            ],
            dtype=np.int8,
        )
    )
    _ATLAS["tanner_2x3_L7"] = _em([[1, 2, 4], [6, 5, 3]], 7)
    _ATLAS["tanner_3x4_L26"] = _em(
        [[1, 5, 25, 21], [9, 19, 17, 11], [3, 15, 23, 11]], 26
    )
    _ATLAS["five_particles_L31"] = _em(
        [
            [1, 2, 4, {8, 16}],
            [5, 10, 20, {9, 18}],
            [25, 19, 7, {14, 28}],
        ],
        31,
    )
    _ATLAS["pentagon_L11"] = _em([[10, 9, 8, 7, 6], [1, 2, 3, 4, 5]], 11)
    _ATLAS["carbon48"] = _em(
        [
            [24, 24, 36, 36, 36, 36],
            [1, 7, 13, 19, 25, 31],
            [23, 17, 47, 41, 35, 29],
        ],
        48,
    )
    _ATLAS["shell5_L85"] = _em(
        [
            [0, 0, 0, 0, 0],
            [0, 24, 40, 71, 84],
            [1, 49, 58, 81, 84],
        ],
        85,
    )
    _ATLAS["fossorier_rows_L85"] = _em(
        [
            [{0, 24, 40, 71, 84}],
            [{1, 49, 58, 81, 84}],
            [{3, 14, 32, 78, 84}],
            [{16, 33, 50, 67, 84}],
        ],
        85,
    )
    _ATLAS["multi_h2_L38"] = _em(
        [
            [{1, 2, 7}, {9}, {23}, None, None],
            [{12, 37}, {19}, None, {32}, {11, 12}],
            [None, None, {33}, None, None],
        ],
        38,
    )
    _ATLAS["multigraph_product_L205"] = _em([[{0, 2, 3, 65, 70, 85, 97, 154}]], 205)
    _ATLAS["webkb_h2_L65"] = _em(
        [
            [{1, 26, 50}, {2, 19, 49}, {5, 13, 42}],
            [{5, 58}, {5, 60}, {4, 60}],
            [{4, 18, 48}, {23, 28, 61}, {1, 4, 53}],
        ],
        65,
    )


def atlas_names() -> tuple[str, ...]:
    _build_atlas()
    return tuple(sorted(_ATLAS))


def atlas(name: str):
    """Fixture lookup; returns an ExponentMatrix or SparseBinaryMatrix."""
    _build_atlas()
    try:
        return _ATLAS[name]
    except KeyError:
        raise KeyError(f"unknown atlas entry '{name}'; known: {', '.join(sorted(_ATLAS))}")

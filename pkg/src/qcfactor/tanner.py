"""Tanner-graph structure metrics: girth, cycle enumeration with EMD/ACE,
the quasi-cyclic cycle condition, and bounded trapping-set search."""

from __future__ import annotations

import json
from collections import Counter, deque
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

from .errors import DomainError
from .qc import ExponentMatrix, SparseBinaryMatrix

CYCLE_LEN_GUARD = 12
TS_A_GUARD = 8


@dataclass(frozen=True)
class TannerGraph:
    """Bipartite variable-node / check-node adjacency."""

    vn_count: int
    cn_count: int
    vn_adj: tuple[tuple[int, ...], ...]
    cn_adj: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        for v, adj in enumerate(self.vn_adj):
            if len(set(adj)) != len(adj):
                raise DomainError(f"variable node {v} has parallel edges")
        edges = {(v, c) for v, adj in enumerate(self.vn_adj) for c in adj}
        back = {(v, c) for c, adj in enumerate(self.cn_adj) for v in adj}
        if edges != back:
            raise DomainError("vn/cn adjacency lists are not symmetric")

    @property
    def edge_count(self) -> int:
        return sum(len(a) for a in self.vn_adj)

    def vn_degree(self, v: int) -> int:
        return len(self.vn_adj[v])


def tanner(H: SparseBinaryMatrix) -> TannerGraph:
    """Variable node per column, check node per row, edge per one-entry."""
    if H.nrows == 0 or H.ncols == 0:
        raise DomainError("parity-check matrix must be non-empty")
    vn_adj: list[list[int]] = [[] for _ in range(H.ncols)]
    for i, row in enumerate(H.rows):
        for j in row:
            vn_adj[j].append(i)
    return TannerGraph(
        H.ncols,
        H.nrows,
        tuple(tuple(a) for a in vn_adj),
        tuple(tuple(r) for r in H.rows),
    )


def _unified_adj(G: TannerGraph) -> list[list[int]]:
    """Single adjacency over nodes 0..vn-1 (variables) and vn..vn+cn-1 (checks)."""
    n = G.vn_count
    adj = [list() for _ in range(n + G.cn_count)]
    for v, checks in enumerate(G.vn_adj):
        for c in checks:
            adj[v].append(n + c)
            adj[n + c].append(v)
    return adj


def girth(G: TannerGraph):
    """Length of the shortest cycle (BFS from every node); None if acyclic."""
    adj = _unified_adj(G)
    n = len(adj)
    best = None
    for root in range(n):
        dist = [-1] * n
        parent = [-1] * n
        dist[root] = 0
        q = deque([root])
        while q:
            u = q.popleft()
            if best is not None and 2 * dist[u] >= best:
                continue
            for w in adj[u]:
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    parent[w] = u
                    q.append(w)
                elif parent[u] != w and parent[w] != u:
                    # cross edge closes a cycle through the BFS tree
                    cyc = dist[u] + dist[w] + 1
                    if best is None or cyc < best:
                        best = cyc
    return best


@dataclass(frozen=True)
class CycleRecord:
    length: int
    vnodes: tuple[int, ...]
    cnodes: tuple[int, ...]
    emd: int
    ace: int


def _cycle_metrics(G: TannerGraph, vnodes: Sequence[int]) -> tuple[int, int]:
    vset = set(vnodes)
    touched: Counter[int] = Counter()
    for v in vset:
        for c in G.vn_adj[v]:
            touched[c] += 1
    emd = sum(1 for c, k in touched.items() if k == 1)
    ace = sum(G.vn_degree(v) - 2 for v in vset)
    return emd, ace


def enumerate_cycles(G: TannerGraph, max_len: int) -> list[CycleRecord]:
    """All simple cycles of length <= max_len (even, capped at 12).

    Each record carries the exact EMD (checks singly connected to the
    cycle's variable nodes) and ACE = sum(deg(v) - 2).
    """
    if max_len % 2 != 0:
        raise DomainError("max_len must be even")
    if max_len > CYCLE_LEN_GUARD:
        raise DomainError(f"max_len > {CYCLE_LEN_GUARD} not supported")
    adj = _unified_adj(G)
    n_nodes = len(adj)
    found: set[tuple[tuple[int, ...], tuple[int, ...]]] = set()
    records: list[CycleRecord] = []

    def dfs(start: int, node: int, path: list[int], on_path: set):
        if len(path) > max_len:
            return
        for w in adj[node]:
            if w == start and len(path) >= 4:
                if path[1] < path[-1]:  # one orientation only
                    vnodes = tuple(sorted(p for p in path if p < G.vn_count))
                    cnodes = tuple(sorted(p - G.vn_count for p in path if p >= G.vn_count))
                    key = (vnodes, cnodes)
                    if key not in found:
                        found.add(key)
                        emd, ace = _cycle_metrics(G, vnodes)
                        records.append(CycleRecord(len(path), vnodes, cnodes, emd, ace))
            elif w > start and w not in on_path and len(path) < max_len:
                path.append(w)
                on_path.add(w)
                dfs(start, w, path, on_path)
                on_path.discard(w)
                path.pop()

    for start in range(n_nodes):
        dfs(start, start, [start], {start})
    records.sort(key=lambda r: (r.length, r.vnodes, r.cnodes))
    return records


def emd_spectrum(G: TannerGraph, max_len: int) -> dict[tuple[int, int], int]:
    """Histogram mapping (cycle length, emd) -> count."""
    hist: Counter[tuple[int, int]] = Counter()
    for rec in enumerate_cycles(G, max_len):
        hist[(rec.length, rec.emd)] += 1
    return dict(hist)


# ---------------------------------------------------------------------------
# quasi-cyclic cycle condition and block-level girth search
# ---------------------------------------------------------------------------

Chain = Sequence[tuple[int, int, int]]


def qc_cycle_condition(E: ExponentMatrix, chain: Chain) -> bool:
    """True iff the alternating shift sum of a closed chain is 0 mod L.

    The chain is a sequence of (block_row, block_col, shift) entries of even
    length >= 4.  Consecutive entries (cyclically) must share the block row
    at even positions and the block column at odd positions; two consecutive
    entries may sit in the same cell only with distinct shifts (multi-edge
    moves).
    """
    chain = list(chain)
    if len(chain) < 4 or len(chain) % 2 != 0:
        raise DomainError("chain must have even length >= 4")
    for i, j, s in chain:
        if not (0 <= i < E.rows and 0 <= j < E.cols):
            raise DomainError(f"cell ({i},{j}) outside the matrix")
        if s not in E.cells[i][j]:
            raise DomainError(f"cell ({i},{j}) does not contain shift {s}")
    for k in range(len(chain)):
        a = chain[k]
        b = chain[(k + 1) % len(chain)]
        if a == b:
            raise DomainError(f"chain repeats the identical edge at step {k}")
        if k % 2 == 0:
            if a[0] != b[0]:
                raise DomainError(f"step {k}: expected a row-sharing move")
        else:
            if a[1] != b[1]:
                raise DomainError(f"step {k}: expected a column-sharing move")
    total = sum((s if k % 2 == 0 else -s) for k, (_, _, s) in enumerate(chain))
    return total % E.L == 0


def _slot_list(E: ExponentMatrix) -> list[tuple[int, int, int]]:
    return [
        (i, j, s)
        for i in range(E.rows)
        for j in range(E.cols)
        for s in sorted(E.cells[i][j])
    ]


def qc_girth_search(E: ExponentMatrix):
    """Exact girth of expand(E) found purely in the exponent domain.

    Performs BFS over (directed labelled edge, shift-sum residue) states;
    the shortest closed non-backtracking walk whose alternating sum is
    0 mod L has the same length as the shortest cycle of the expanded
    matrix.  Returns (girth, witness_chain); (None, None) when acyclic.
    The witness satisfies :func:`qc_cycle_condition`.
    """
    slots = _slot_list(E)
    if not slots:
        return None, None
    L = E.L
    nslots = len(slots)
    # outgoing[('r', i)] = slots leaving row i, outgoing[('c', j)] likewise
    by_row: dict[int, list[int]] = {}
    by_col: dict[int, list[int]] = {}
    for idx, (i, j, _) in enumerate(slots):
        by_row.setdefault(i, []).append(idx)
        by_col.setdefault(j, []).append(idx)

    best = None
    best_chain = None
    for start in range(nslots):
        si, sj, ss = slots[start]
        # walk: row si --start--> col sj --e2--> row ... back to row si
        # state: (at_col?, node, residue, last_slot)
        init = (True, sj, ss % L, start)
        dist = {init: 1}
        back: dict[tuple, tuple] = {init: None}
        q = deque([init])
        while q:
            state = q.popleft()
            at_col, node, res, last = state
            steps = dist[state]
            if best is not None and steps + 1 >= best:
                continue
            sign = -1 if at_col else 1  # leaving a col subtracts, a row adds
            candidates = by_col[node] if at_col else by_row[node]
            for nxt in candidates:
                if nxt == last:
                    continue
                i2, j2, s2 = slots[nxt]
                res2 = (res + sign * s2) % L
                to_col = not at_col
                node2 = j2 if to_col else i2
                closes = (
                    not to_col
                    and node2 == si
                    and res2 == 0
                    and steps + 1 >= 4
                    and nxt != start  # seam must not backtrack over the start edge
                )
                if closes:
                    best = steps + 1
                    chain = [slots[nxt]]
                    st = state
                    while st is not None:
                        chain.append(slots[st[3]])
                        st = back[st]
                    chain.reverse()
                    # rotate so the first move shares a row (validator phase)
                    best_chain = tuple(chain[-1:] + chain[:-1])
                    break
                st2 = (to_col, node2, res2, nxt)
                if st2 not in dist:
                    dist[st2] = steps + 1
                    back[st2] = state
                    q.append(st2)
            else:
                continue
            break  # closed at the shortest possible length for this start
    return best, best_chain


# ---------------------------------------------------------------------------
# trapping sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrappingSetReport:
    a: int
    b: int
    multiplicity: int
    witnesses: tuple[tuple[int, ...], ...]
    lower_bound: bool = True


def odd_degree_checks(G: TannerGraph, vnodes: Iterable[int]) -> int:
    deg: Counter[int] = Counter()
    for v in set(vnodes):
        for c in G.vn_adj[v]:
            deg[c] += 1
    return sum(1 for k in deg.values() if k % 2 == 1)


def trapping_sets(
    G: TannerGraph, a_max: int, b_max: int, max_witnesses: int = 64
) -> list[TrappingSetReport]:
    """Bounded TS(a,b) search seeded from short cycles.

    Each cycle's variable nodes form a seed; seeds are grown one variable
    node at a time, always choosing the node that minimises the number of
    odd-degree checks (ties: lexicographically smallest node set).
    Multiplicities are lower bounds.
    """
    if a_max > TS_A_GUARD:
        raise DomainError(f"a_max > {TS_A_GUARD} not supported")
    max_cycle = min(CYCLE_LEN_GUARD, 2 * a_max)
    seen: dict[tuple[int, int], set[tuple[int, ...]]] = {}

    def record(vset: frozenset[int]):
        a = len(vset)
        if a > a_max:
            return
        b = odd_degree_checks(G, vset)
        if b > b_max:
            return
        seen.setdefault((a, b), set()).add(tuple(sorted(vset)))

    seeds = {frozenset(rec.vnodes) for rec in enumerate_cycles(G, max_cycle)}
    for seed in sorted(seeds, key=sorted):
        current = seed
        record(current)
        while len(current) < a_max:
            candidates = []
            for v in range(G.vn_count):
                if v in current:
                    continue
                grown = current | {v}
                candidates.append((odd_degree_checks(G, grown), tuple(sorted(grown)), grown))
            if not candidates:
                break
            candidates.sort(key=lambda t: (t[0], t[1]))
            current = candidates[0][2]
            record(current)

    reports = []
    for (a, b), wit in sorted(seen.items()):
        ordered = tuple(sorted(wit))[:max_witnesses]
        reports.append(TrappingSetReport(a, b, len(wit), ordered))
    return reports


# ---------------------------------------------------------------------------
# JSON-lines serialisation
# ---------------------------------------------------------------------------

def spectrum_to_json_lines(hist: dict[tuple[int, int], int], sink: IO[str]) -> None:
    for (length, emd), count in sorted(hist.items()):
        sink.write(json.dumps({"length": length, "emd": emd, "count": count}) + "\n")


def trapping_sets_to_json_lines(reports: Sequence[TrappingSetReport], sink: IO[str]) -> None:
    for r in reports:
        sink.write(
            json.dumps(
                {
                    "a": r.a,
                    "b": r.b,
                    "multiplicity": r.multiplicity,
                    "lower_bound": r.lower_bound,
                    "witnesses": [list(w) for w in r.witnesses],
                }
            )
            + "\n"
        )

import io
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcfactor import qc, tanner
from qcfactor.construct import atlas
from qcfactor.errors import DomainError


def em(cells, L):
    return qc.ExponentMatrix.from_lists(cells, L)


def graph_of(dense):
    return tanner.tanner(qc.SparseBinaryMatrix.from_dense(np.asarray(dense)))


def brute_cycles(G, max_len):
    """Independent cycle oracle: enumerate vertex subsets forming simple
    cycles via adjacency walks over the unified graph."""
    n = G.vn_count + G.cn_count
    adj = [set() for _ in range(n)]
    for v, checks in enumerate(G.vn_adj):
        for c in checks:
            adj[v].add(G.vn_count + c)
            adj[G.vn_count + c].add(v)
    found = set()
    def walk(start, node, path):
        for w in adj[node]:
            if w == start and len(path) >= 4:
                found.add(frozenset(path))
            elif w > start and w not in path and len(path) < max_len:
                walk(start, w, path + [w])
    for s in range(n):
        walk(s, s, [s])
    return found


def brute_emd(G, vnodes):
    touched = {}
    for v in vnodes:
        for c in G.vn_adj[v]:
            touched[c] = touched.get(c, 0) + 1
    return sum(1 for k in touched.values() if k == 1)


class TestTanner:
    def test_eq1_counts(self):
        H = atlas("h_eq1")
        G = tanner.tanner(H)
        assert (G.vn_count, G.cn_count, G.edge_count) == (5, 3, 10)

    def test_identity_disjoint_edges(self):
        G = graph_of(np.eye(3, dtype=int))
        assert G.edge_count == 3
        assert tanner.girth(G) is None

    def test_zero_matrix_edgeless(self):
        G = graph_of(np.zeros((2, 3), dtype=int))
        assert G.edge_count == 0


class TestGirth:
    def test_all_ones_2x2(self):
        assert tanner.girth(graph_of(np.ones((2, 2), dtype=int))) == 4

    def test_tree_acyclic(self):
        H = np.array([[1, 1, 0], [0, 1, 1]])
        assert tanner.girth(graph_of(H)) is None

    def test_matches_exhaustive_search_on_tanner_code(self):
        E = atlas("tanner_2x3_L7")
        G = tanner.tanner(qc.expand(E))
        g = tanner.girth(G)
        cycles = brute_cycles(G, 12)
        shortest = min(len(c) for c in cycles)
        assert g == shortest == 12


class TestQcCycleCondition:
    def test_spec_false_example(self):
        E = em([[1, 2], [6, 5]], 7)
        chain = [(0, 0, 1), (0, 1, 2), (1, 1, 5), (1, 0, 6)]
        assert tanner.qc_cycle_condition(E, chain) is False
        # cross-check: the expansion has no 4-cycle
        assert tanner.girth(tanner.tanner(qc.expand(E))) > 4

    def test_all_zero_shifts_true(self):
        E = em([[0, 0], [0, 0]], 3)
        chain = [(0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0)]
        assert tanner.qc_cycle_condition(E, chain) is True

    def test_carbon_radial_phi_four_chain(self):
        # rows r and phi share the shift difference at columns 0 and 2
        E = atlas("carbon48")
        chain = [(0, 0, 24), (0, 2, 36), (1, 2, 13), (1, 0, 1)]
        assert tanner.qc_cycle_condition(E, chain) is True
        assert tanner.girth(tanner.tanner(qc.expand(E))) == 4

    def test_empty_cell_rejected(self):
        E = em([[1, None], [2, 3]], 5)
        with pytest.raises(DomainError):
            tanner.qc_cycle_condition(E, [(0, 0, 1), (0, 1, 0), (1, 1, 3), (1, 0, 2)])

    def test_bad_alternation_rejected(self):
        E = em([[1, 2], [6, 5]], 7)
        with pytest.raises(DomainError):
            tanner.qc_cycle_condition(E, [(0, 0, 1), (1, 1, 5), (0, 1, 2), (1, 0, 6)])

    def test_multi_edge_parallel_chain(self):
        # two parallel circulants create 4-cycles iff 2(s-t) = 0 mod L
        E_yes = em([[{0, 2}]], 4)
        chain = [(0, 0, 0), (0, 0, 2), (0, 0, 0), (0, 0, 2)]
        assert tanner.qc_cycle_condition(E_yes, chain) is True
        E_no = em([[{0, 2}]], 5)
        assert tanner.qc_cycle_condition(E_no, chain) is False


class TestQcGirthEquivalence:
    @given(st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_random_equivalence(self, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(1, 4))
        n = int(rng.integers(1, 7))
        L = int(rng.integers(1, 13))
        cells = []
        for _ in range(m):
            row = []
            for _ in range(n):
                r = rng.random()
                if r < 0.2:
                    row.append(None)
                elif r < 0.9 or L < 2:
                    row.append(int(rng.integers(L)))
                else:
                    row.append(set(int(x) for x in rng.choice(L, size=2, replace=False)))
            cells.append(row)
        if all(c is None for row in cells for c in row):
            return
        E = em(cells, L)
        H = qc.expand(E)
        if H.nnz == 0:
            return
        g_graph = tanner.girth(tanner.tanner(H))
        g_chain, witness = tanner.qc_girth_search(E)
        assert g_graph == g_chain
        if witness is not None:
            assert tanner.qc_cycle_condition(E, witness) is True
            assert len(witness) == g_chain


class TestEnumerateCycles:
    def test_all_ones_2x2(self):
        recs = tanner.enumerate_cycles(graph_of(np.ones((2, 2), dtype=int)), 4)
        assert len(recs) == 1
        assert recs[0].length == 4
        assert recs[0].ace == 0
        assert recs[0].emd == 0

    def test_all_ones_2x3_three_cycles(self):
        G = graph_of(np.ones((2, 3), dtype=int))
        recs = tanner.enumerate_cycles(G, 4)
        assert len(recs) == 3
        for rec in recs:
            assert rec.emd == brute_emd(G, rec.vnodes)
            assert rec.ace == sum(G.vn_degree(v) - 2 for v in rec.vnodes)

    def test_counts_match_brute_force(self):
        rng = np.random.default_rng(5)
        H = (rng.random((4, 6)) < 0.5).astype(int)
        G = graph_of(H)
        recs = tanner.enumerate_cycles(G, 8)
        brute = brute_cycles(G, 8)
        assert len(recs) == len(brute)

    def test_eight_cycle_detected(self):
        # an 8-cycle plus one extrinsic degree-1 check per variable node
        H = np.zeros((8, 4), dtype=int)
        for k in range(4):
            H[k, k] = 1
            H[k, (k + 1) % 4] = 1
            H[4 + k, k] = 1  # extrinsic checks
        recs = tanner.enumerate_cycles(graph_of(H), 8)
        assert [r.length for r in recs] == [8]
        assert recs[0].emd == 4
        assert recs[0].ace == 4

    def test_guards(self):
        G = graph_of(np.ones((2, 2), dtype=int))
        with pytest.raises(DomainError):
            tanner.enumerate_cycles(G, 5)
        with pytest.raises(DomainError):
            tanner.enumerate_cycles(G, 14)

    def test_emd_le_ace_random(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            H = (rng.random((4, 7)) < 0.45).astype(int)
            G = graph_of(H)
            for rec in tanner.enumerate_cycles(G, 8):
                assert rec.emd <= rec.ace

    def test_invariant_under_permutation(self):
        rng = np.random.default_rng(3)
        H = (rng.random((4, 6)) < 0.5).astype(int)
        perm_r = rng.permutation(4)
        perm_c = rng.permutation(6)
        H2 = H[np.ix_(perm_r, perm_c)]
        c1 = tanner.enumerate_cycles(graph_of(H), 8)
        c2 = tanner.enumerate_cycles(graph_of(H2), 8)
        assert len(c1) == len(c2)
        assert sorted(r.length for r in c1) == sorted(r.length for r in c2)


class TestTrappingSets:
    def test_ts44_from_single_eight_cycle(self):
        H = np.zeros((8, 4), dtype=int)
        for k in range(4):
            H[k, k] = 1
            H[k, (k + 1) % 4] = 1
            H[4 + k, k] = 1
        reports = tanner.trapping_sets(graph_of(H), a_max=4, b_max=6)
        found = {(r.a, r.b) for r in reports}
        assert (4, 4) in found

    def test_ts20_codeword_support(self):
        reports = tanner.trapping_sets(graph_of(np.ones((2, 2), dtype=int)), 4, 4)
        found = {(r.a, r.b) for r in reports}
        assert (2, 0) in found

    def test_ts53_overlapping_cycles(self):
        # five variables, six even checks pairing them, three odd checks
        pairs = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)]
        H = np.zeros((9, 5), dtype=int)
        for k, (a, b) in enumerate(pairs):
            H[k, a] = H[k, b] = 1
        for k, v in enumerate((1, 3, 4)):
            H[6 + k, v] = 1
        reports = tanner.trapping_sets(graph_of(H), a_max=5, b_max=5)
        found = {(r.a, r.b) for r in reports}
        assert (5, 3) in found

    def test_ts_a0_witnesses_are_codewords(self):
        rng = np.random.default_rng(9)
        H = (rng.random((5, 8)) < 0.4).astype(int)
        G = graph_of(H)
        for rep in tanner.trapping_sets(G, a_max=6, b_max=6):
            if rep.b != 0:
                continue
            for wit in rep.witnesses:
                x = np.zeros(8, dtype=int)
                x[list(wit)] = 1
                assert not ((H @ x) % 2).any()

    def test_guard(self):
        with pytest.raises(DomainError):
            tanner.trapping_sets(graph_of(np.ones((2, 2), dtype=int)), 9, 1)


class TestSpectrum:
    def test_acyclic_empty(self):
        assert tanner.emd_spectrum(graph_of(np.array([[1, 1, 0], [0, 1, 1]])), 8) == {}

    def test_2x2_histogram(self):
        G = graph_of(np.ones((2, 2), dtype=int))
        e0 = brute_emd(G, (0, 1))
        assert tanner.emd_spectrum(G, 4) == {(4, e0): 1}

    def test_json_lines(self):
        G = graph_of(np.ones((2, 2), dtype=int))
        buf = io.StringIO()
        tanner.spectrum_to_json_lines(tanner.emd_spectrum(G, 4), buf)
        assert buf.getvalue().count("\n") == 1
        buf2 = io.StringIO()
        tanner.trapping_sets_to_json_lines(tanner.trapping_sets(G, 2, 4), buf2)
        assert "multiplicity" in buf2.getvalue()

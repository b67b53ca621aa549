import math

import numpy as np
import pytest

from qcfactor import dataio
from qcfactor import factorize as fz
from qcfactor.construct import Mask
from qcfactor.errors import ConstructionError, DomainError
from qcfactor.factorize import Budget, FactorSet, _split
from qcfactor.qc import SparseBinaryMatrix


def full_mask(n):
    return Mask(SparseBinaryMatrix(n, n, tuple(tuple(range(n)) for _ in range(n))), "product")


class TestTsvd:
    def test_rank_one_exact(self):
        u = np.arange(1.0, 5.0)
        X = np.outer(u, u)
        res = fz.tsvd(X, 1)
        assert res.error == pytest.approx(0.0, abs=1e-10)

    def test_identity_rank2(self):
        res = fz.tsvd(np.eye(4), 2)
        assert res.error == pytest.approx(math.sqrt(2.0))

    def test_eckart_young_against_random_factorizations(self):
        rng = np.random.default_rng(0)
        X = rng.random((12, 12))
        r = 3
        best = fz.tsvd(X, r).error
        for _ in range(20):
            A = rng.normal(size=(12, r))
            B = rng.normal(size=(r, 12))
            assert np.linalg.norm(X - A @ B) >= best - 1e-9

    def test_rank_bounds(self):
        with pytest.raises(DomainError):
            fz.tsvd(np.eye(3), 0)
        with pytest.raises(DomainError):
            fz.tsvd(np.eye(3), 4)

    def test_approximation_matches_error(self):
        X = np.random.default_rng(1).random((8, 8))
        res = fz.tsvd(X, 3)
        assert np.linalg.norm(X - res.approximation()) == pytest.approx(res.error, rel=1e-9)


class TestBudget:
    def test_power_of_two(self):
        b = Budget.for_size(256)
        assert (b.M, b.K, b.tsvd_rank) == (8, 8, 32)
        assert b.sf_nnz_nominal == 256 * 64

    def test_non_power_of_two(self):
        b = Budget.for_size(48)
        assert b.M == math.ceil(math.log2(48))

    def test_tsvd_never_fewer_nonzeros(self):
        for N in (16, 32, 48, 100, 256):
            b = Budget.for_size(N)
            sf = b.sf_nnz_nominal + N * b.M  # worst case diagonal top-up
            r = b.tsvd_rank_matching(sf)
            assert 2 * N * r + r >= sf or r == N


class TestSfInit:
    def test_value_range(self):
        mask = fz.chord_mask_any(16)  # K = 4
        fs = fz.sf_init([mask] * 2, seed=0)
        for v in fs.values:
            assert np.all(v >= 0.25) and np.all(v <= 0.26)

    def test_seed_determinism(self):
        mask = fz.chord_mask_any(16)
        a = fz.sf_init([mask], seed=5)
        b = fz.sf_init([mask], seed=5)
        c = fz.sf_init([mask], seed=6)
        assert np.array_equal(a.values[0], b.values[0])
        assert not np.array_equal(a.values[0], c.values[0])


class TestObjectiveGrad:
    def test_exact_reproduction_zero(self):
        masks = [fz.chord_mask_any(8)] * 3
        fs = fz.sf_init(masks, seed=2)
        X = fs.product()
        f, grads = fz.sf_objective_grad(X, fs)
        assert f == pytest.approx(0.0, abs=1e-18)
        for g in grads:
            assert np.allclose(g, 0.0, atol=1e-9)

    def test_single_full_factor_closed_form(self):
        mask = full_mask(5)
        fs = fz.sf_init([mask], seed=0)
        X = np.random.default_rng(3).random((5, 5))
        f, grads = fz.sf_objective_grad(X, fs)
        W = fs.to_dense_factors()[0]
        assert np.allclose(grads[0].reshape(5, 5), -2 * (X - W))
        assert f == pytest.approx(np.sum((X - W) ** 2))

    @pytest.mark.parametrize("N,M", [(8, 1), (8, 3), (16, 3), (64, 2)])
    def test_finite_differences(self, N, M):
        rng = np.random.default_rng(N * 10 + M)
        masks = [fz.chord_mask_any(N)] * M
        fs = fz.sf_init(masks, seed=1)
        X = rng.random((N, N))
        f, grads = fz.sf_objective_grad(X, fs)
        g = np.concatenate(grads)
        x0 = np.concatenate(fs.values)
        h = 1e-6
        for k in rng.choice(x0.size, size=min(20, x0.size), replace=False):
            xp = x0.copy()
            xp[k] += h
            xm = x0.copy()
            xm[k] -= h
            fp = fz.sf_objective(X, FactorSet(tuple(masks), _split(xp, masks)))
            fm = fz.sf_objective(X, FactorSet(tuple(masks), _split(xm, masks)))
            fd = (fp - fm) / (2 * h)
            assert abs(fd - g[k]) / max(1.0, abs(fd)) < 1e-5


class TestOptimize:
    def test_realizable_recovery(self):
        masks = [fz.chord_mask_any(16)] * 4
        X = fz.sf_init(masks, seed=11).product()
        res = fz.sf_optimize(X, masks, iters=5000, seed=1)
        assert res.final_fnorm < 1e-6 * np.linalg.norm(X)

    def test_zero_target(self):
        masks = [fz.chord_mask_any(8)] * 3
        res = fz.sf_optimize(np.zeros((8, 8)), masks, iters=500, seed=0)
        assert res.final_fnorm < 1e-8

    def test_history_non_increasing(self):
        X = np.random.default_rng(2).random((16, 16))
        res = fz.sf_optimize(X, [fz.chord_mask_any(16)] * 4, iters=300, seed=0)
        assert all(
            res.history[k + 1] <= res.history[k] + 1e-12 for k in range(len(res.history) - 1)
        )

    def test_mask_respected(self):
        X = np.random.default_rng(3).random((16, 16))
        mask = fz.square_ldpc_mask(16, 4, 0)
        res = fz.sf_optimize(X, [mask] * 2, iters=100, seed=0)
        pattern = mask.matrix.to_dense().astype(bool)
        for W in res.factors.to_dense_factors():
            assert np.all(W[~pattern] == 0.0)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(4)
        N = 16
        mask = fz.chord_mask_any(N)
        masks = [mask] * 3
        X = rng.random((N, N))
        init = fz.sf_init(masks, seed=0)
        perm = rng.permutation(N)
        P = np.eye(N)[perm]
        pm_dense = (P @ mask.matrix.to_dense() @ P.T).astype(bool)
        pmask = Mask(SparseBinaryMatrix.from_dense(pm_dense), mask.provenance)
        rowsP, colsP = fz._mask_indices(pmask)
        permuted_inits = []
        for W in init.to_dense_factors():
            WP = P @ W @ P.T
            permuted_inits.append(WP[rowsP, colsP])
        # trajectories agree up to float non-associativity of the permuted
        # summation order; bitwise equality is unattainable, and the tiny
        # rounding drift compounds on long nonconvex runs
        res_a = fz.sf_optimize(X, masks, iters=50, seed=0, init_values=init.values)
        res_b = fz.sf_optimize(
            P @ X @ P.T, [pmask] * 3, iters=50, seed=0, init_values=permuted_inits
        )
        assert len(res_a.history) == len(res_b.history)
        assert np.allclose(res_a.history, res_b.history, rtol=1e-7, atol=1e-10)

    def test_determinism(self):
        X = np.random.default_rng(5).random((16, 16))
        masks = [fz.chord_mask_any(16)] * 3
        a = fz.sf_optimize(X, masks, iters=100, seed=3)
        b = fz.sf_optimize(X, masks, iters=100, seed=3)
        assert a.history == b.history
        for va, vb in zip(a.factors.values, b.factors.values):
            assert np.array_equal(va, vb)

    def test_non_finite_initial_objective(self):
        masks = [full_mask(4)]
        bad = [np.full(16, np.inf)]
        with pytest.raises(ConstructionError):
            fz.sf_optimize(np.ones((4, 4)), masks, iters=10, init_values=bad)


class TestChordAny:
    def test_power_of_two_matches(self):
        assert fz.chord_mask_any(16).matrix == fz.chord_mask(16).matrix

    def test_non_power_of_two(self):
        m = fz.chord_mask_any(12)
        offs = sorted({(1 << k) % 12 for k in range(4)} - {0})
        assert m.matrix.rows[0] == tuple(sorted(offs))


class TestBenchmark:
    def test_report_columns_and_skip(self):
        def boom():
            raise IOError("missing file")

        X = dataio.synth_covariance(16, instances=100, seed=0)
        rows = fz.benchmark(
            [("ok", lambda: X), ("broken", boom)],
            methods=("tsvd", "sf_chord"),
            iters=50,
            seeds=(0,),
        )
        names = [(r.dataset, r.method) for r in rows]
        assert ("ok", "tsvd") in names and ("broken", "sf_chord") in names
        broken = [r for r in rows if r.dataset == "broken"]
        assert all(math.isnan(r.fnorm_error) for r in broken)
        ok_sf = [r for r in rows if r.dataset == "ok" and r.method == "sf_chord"][0]
        assert ok_sf.nnz > 0 and ok_sf.seconds >= 0

    def test_budget_parity_in_rows(self):
        X = dataio.synth_covariance(16, instances=100, seed=0)
        rows = fz.benchmark(
            [("c", lambda: X)], methods=("tsvd", "sf_ldpc_peg"), iters=30, seeds=(0,)
        )
        tsvd_row = [r for r in rows if r.method == "tsvd"][0]
        sf_row = [r for r in rows if r.method == "sf_ldpc_peg"][0]
        assert tsvd_row.nnz >= sf_row.nnz

    def test_jobs_parallel_same_result(self):
        X1 = dataio.synth_network(20, 60, seed=1)
        X2 = dataio.synth_network(24, 72, seed=2)
        data = [("a", lambda: X1), ("b", lambda: X2)]
        r1 = fz.benchmark(data, methods=("tsvd",), iters=10, seeds=(0,), jobs=1)
        r2 = fz.benchmark(data, methods=("tsvd",), iters=10, seeds=(0,), jobs=2)
        assert [(r.dataset, r.fnorm_error) for r in r1] == [
            (r.dataset, r.fnorm_error) for r in r2
        ]

    def test_unknown_method(self):
        with pytest.raises(DomainError):
            fz.benchmark([], methods=("nope",))

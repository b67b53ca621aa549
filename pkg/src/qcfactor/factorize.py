"""Sparse square-matrix factorization with fixed masks, the TSVD baseline
at matched non-zero budgets, and the benchmark driver."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .construct import Mask, chord_mask, square_ldpc_mask, square_qc_mask
from .errors import ConstructionError, DomainError
from .qc import SparseBinaryMatrix

try:  # optional JIT kernels; scipy/numpy paths otherwise
    import numba

    @numba.njit(cache=True)
    def _restricted_neg2_dot(PT, RT, rows, cols, out):  # pragma: no cover
        for k in range(rows.size):
            p = rows[k]
            q = cols[k]
            acc = 0.0
            for u in range(PT.shape[1]):
                acc += PT[p, u] * RT[q, u]
            out[k] = -2.0 * acc

    @numba.njit(cache=True)
    def _csr_gather(indptr, indices, data, A, out):  # pragma: no cover
        # out = W @ A for CSR W, dense row-major A; out preallocated
        n = indptr.size - 1
        w = A.shape[1]
        for i in range(n):
            for c in range(w):
                out[i, c] = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                v = data[k]
                for c in range(w):
                    out[i, c] += v * A[j, c]

    @numba.njit(cache=True)
    def _csr_scatter(indptr, indices, data, A, out):  # pragma: no cover
        # out = W^T @ A for CSR W, dense row-major A; out preallocated
        n = indptr.size - 1
        w = A.shape[1]
        for i in range(n):
            for c in range(w):
                out[i, c] = 0.0
        for i in range(n):
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                v = data[k]
                for c in range(w):
                    out[j, c] += v * A[i, c]

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _restricted_neg2_dot = None
    _HAVE_NUMBA = False


@dataclass(frozen=True)
class TsvdResult:
    u: np.ndarray
    singulars: np.ndarray
    vt: np.ndarray
    error: float

    def approximation(self) -> np.ndarray:
        return (self.u * self.singulars) @ self.vt

    @property
    def nnz(self) -> int:
        r = self.singulars.size
        n = self.u.shape[0]
        return 2 * n * r + r


def tsvd(X, r: int) -> TsvdResult:
    """Best rank-r approximation; error = sqrt(sum of discarded sigma^2)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise DomainError("X must be square")
    n = X.shape[0]
    if not (1 <= r <= n):
        raise DomainError(f"rank {r} outside [1, {n}]")
    u, s, vt = np.linalg.svd(X, full_matrices=False)
    err = float(np.sqrt(np.sum(s[r:] ** 2)))
    return TsvdResult(u[:, :r].copy(), s[:r].copy(), vt[:r].copy(), err)


@dataclass(frozen=True)
class Budget:
    """Matched non-zero budgets: M factors of ~N log2 N entries each versus
    a TSVD rank with no fewer stored numbers."""

    N: int
    M: int
    K: int
    tsvd_rank: int

    @classmethod
    def for_size(cls, N: int) -> "Budget":
        if N < 2:
            raise DomainError("budget needs N >= 2")
        lg = math.log2(N)
        M = math.ceil(lg)
        r = math.ceil(lg * lg / 2.0)
        return cls(N=N, M=M, K=M, tsvd_rank=min(N, max(1, r)))

    @property
    def sf_nnz_nominal(self) -> int:
        return self.N * self.M * self.K

    def tsvd_rank_matching(self, sf_nnz: int) -> int:
        """Smallest rank with 2Nr + r >= sf_nnz, at least the default rank."""
        r = max(self.tsvd_rank, math.ceil(sf_nnz / (2 * self.N + 1)))
        return min(self.N, r)


# ---------------------------------------------------------------------------
# factor sets, objective and gradient
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FactorSet:
    masks: tuple[Mask, ...]
    values: tuple[np.ndarray, ...]

    def __post_init__(self):
        if not self.masks:
            raise DomainError("need at least one factor")
        n = self.masks[0].n
        for mask, vals in zip(self.masks, self.values):
            if mask.n != n:
                raise DomainError("all masks must share the same size")
            if vals.shape != (mask.nnz,):
                raise DomainError("value array does not match mask nnz")

    @property
    def M(self) -> int:
        return len(self.masks)

    @property
    def n(self) -> int:
        return self.masks[0].n

    @property
    def total_nnz(self) -> int:
        return sum(m.nnz for m in self.masks)

    def to_dense_factors(self) -> list[np.ndarray]:
        out = []
        for mask, vals in zip(self.masks, self.values):
            rows, cols = _mask_indices(mask)
            W = np.zeros((mask.n, mask.n))
            W[rows, cols] = vals
            out.append(W)
        return out

    def product(self) -> np.ndarray:
        mats = _csr_factors(self.masks, self.values)
        P = np.eye(self.n)
        for W in mats:
            P = _dense_times_csr(P, W)
        return P


class _MaskPlan:
    """Precomputed sparse structure for one mask: row-major coordinates,
    CSR index arrays (value order == CSR data order), and the permutation
    taking values into the transpose's CSR data order."""

    def __init__(self, mask: Mask):
        n = mask.n
        self.rows = np.fromiter(
            (i for i, row in enumerate(mask.matrix.rows) for _ in row),
            dtype=np.int64, count=mask.nnz,
        )
        self.cols = np.fromiter(
            (c for row in mask.matrix.rows for c in row), dtype=np.int64, count=mask.nnz
        )
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self.indptr, self.rows + 1, 1)
        np.cumsum(self.indptr, out=self.indptr)
        tagged = sp.csr_matrix(
            (np.arange(mask.nnz, dtype=np.float64) + 1.0, self.cols, self.indptr),
            shape=(n, n),
        )
        t = tagged.T.tocsr()
        t.sort_indices()
        self.perm_t = (t.data - 1.0).astype(np.int64)
        self.indices_t = t.indices.copy()
        self.indptr_t = t.indptr.copy()
        self.n = n
        self.nnz = mask.nnz

    def csr(self, values: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix((values, self.cols, self.indptr), shape=(self.n, self.n))

    def csr_t(self, values: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix(
            (values[self.perm_t], self.indices_t, self.indptr_t), shape=(self.n, self.n)
        )


_mask_plan_cache: dict[int, tuple[Mask, _MaskPlan]] = {}


def _mask_plan(mask: Mask) -> _MaskPlan:
    hit = _mask_plan_cache.get(id(mask))
    if hit is not None and hit[0] is mask:
        return hit[1]
    plan = _MaskPlan(mask)
    if len(_mask_plan_cache) > 256:
        _mask_plan_cache.clear()
    _mask_plan_cache[id(mask)] = (mask, plan)
    return plan


def _mask_indices(mask: Mask) -> tuple[np.ndarray, np.ndarray]:
    plan = _mask_plan(mask)
    return plan.rows, plan.cols


def _csr_factors(masks, values) -> list[sp.csr_matrix]:
    return [_mask_plan(mask).csr(vals) for mask, vals in zip(masks, values)]


def _dense_times_csr(P: np.ndarray, W: sp.csr_matrix) -> np.ndarray:
    # (P @ W) computed as (W.T @ P.T).T so scipy drives the product
    return (W.T @ P.T).T


def sf_init(masks: Sequence[Mask], seed: int = 0) -> FactorSet:
    """Values uniform in [1/K, 1/K + 0.01] with K the mask's mean row nnz."""
    rng = np.random.default_rng(seed)
    values = []
    for mask in masks:
        K = mask.nnz / mask.n
        if K <= 0:
            raise DomainError("mask has no non-zeros")
        lo = 1.0 / K
        values.append(rng.uniform(lo, lo + 1e-2, size=mask.nnz))
    return FactorSet(tuple(masks), tuple(values))


class _ProductEngine:
    """Reusable evaluator over fixed masks.

    Works with transposed dense products throughout so that the sparse
    applies produce kernel-ready C-contiguous arrays with no copies:
    PT_m = W_m^T PT_{m-1} (prefix transposed) and RT_{m-1} = W_m RT_m
    (suffix-times-error transposed).
    """

    def __init__(self, X: np.ndarray, masks: Sequence[Mask]):
        self.X = np.asarray(X, dtype=np.float64)
        self.XT = np.ascontiguousarray(self.X.T)
        self.masks = tuple(masks)
        self.n = self.masks[0].n
        if self.X.shape != (self.n, self.n):
            raise DomainError("X shape does not match the masks")
        self.plans = [_mask_plan(m) for m in self.masks]
        self.M = len(self.masks)
        zero = [np.zeros(p.nnz) for p in self.plans]
        self.mats = [p.csr(z) for p, z in zip(self.plans, zero)]
        self.mats_t = [w.T for w in self.mats]  # csc views sharing data
        self.eye = np.ascontiguousarray(np.eye(self.n))
        self.use_jit = _HAVE_NUMBA and self.n >= 48
        n = self.n
        if self.use_jit:
            # all work buffers owned here so repeated evaluations never
            # touch the allocator
            self.pts_buf = [np.empty((n, n)) for _ in range(self.M)]
            self.rt_buf = [np.empty((n, n)), np.empty((n, n))]
            self.et_buf = np.empty((n, n))
            self.grad_bufs = [np.empty(p.nnz) for p in self.plans]

    def _load(self, values: Sequence[np.ndarray]) -> None:
        for mat, vals in zip(self.mats, values):
            mat.data[:] = vals

    def _prefixes_t(self, values) -> list[np.ndarray]:
        """pts[k] = (W_0 ... W_{k-1})^T; JIT path reuses buffers."""
        self._load(values)
        pts = [self.eye]
        if self.use_jit:
            for m in range(self.M):
                plan = self.plans[m]
                _csr_scatter(plan.indptr, plan.cols, self.mats[m].data, pts[-1], self.pts_buf[m])
                pts.append(self.pts_buf[m])
        else:
            for m in range(self.M):
                pts.append(np.asarray(self.mats_t[m] @ pts[-1]))
        return pts

    def f(self, values: Sequence[np.ndarray]) -> float:
        pts = self._prefixes_t(values)
        diff = self.XT - pts[self.M]
        return float(np.sum(diff * diff))

    def fg(self, values: Sequence[np.ndarray]):
        pts = self._prefixes_t(values)
        if self.use_jit:
            ET = np.subtract(self.XT, pts[self.M], out=self.et_buf)
        else:
            ET = self.XT - pts[self.M]
        f = float(np.sum(ET * ET))
        grads: list[np.ndarray] = [None] * self.M  # type: ignore[list-item]
        RT = ET  # RT_m = (E S_{m+1}^T)^T
        flip = 0
        for m in range(self.M - 1, -1, -1):
            plan = self.plans[m]
            PT = pts[m]
            if self.use_jit:
                out = self.grad_bufs[m]
                _restricted_neg2_dot(PT, RT, plan.rows, plan.cols, out)
                grads[m] = out.copy()
                if m > 0:
                    nxt = self.rt_buf[flip]
                    _csr_gather(plan.indptr, plan.cols, self.mats[m].data, RT, nxt)
                    RT = nxt
                    flip ^= 1
            else:
                out = np.empty(plan.nnz)
                if _restricted_neg2_dot is not None:
                    _restricted_neg2_dot(PT, RT, plan.rows, plan.cols, out)
                else:
                    np.einsum("ij,ij->i", PT[plan.rows], RT[plan.cols], out=out)
                    out *= -2.0
                grads[m] = out
                if m > 0:
                    RT = np.asarray(self.mats[m] @ RT)
        return f, grads


def sf_objective_grad(X, factors: FactorSet):
    """(f, per-factor gradients restricted to the masks).

    f = ||X - prod W||_F^2;  dL/dW_m = -2 A^T E B^T with A, B the prefix
    and suffix products; sparse applies keep the cost near O(N^2 M K).
    """
    engine = _ProductEngine(X, factors.masks)
    return engine.fg(factors.values)


def sf_objective(X, factors: FactorSet) -> float:
    return _ProductEngine(X, factors.masks).f(factors.values)


@dataclass(frozen=True)
class FactorizationResult:
    factors: FactorSet
    history: tuple[float, ...]
    final_fnorm: float
    iterations: int
    elapsed: float
    converged: bool


def _split(concat: np.ndarray, masks: Sequence[Mask]) -> tuple[np.ndarray, ...]:
    out = []
    pos = 0
    for mask in masks:
        out.append(concat[pos : pos + mask.nnz].copy())
        pos += mask.nnz
    return tuple(out)


def sf_optimize(
    X,
    masks: Sequence[Mask],
    iters: int = 20_000,
    seed: int = 0,
    init_values: Sequence[np.ndarray] | None = None,
    history_size: int = 10,
    armijo_c: float = 1e-4,
    shrink: float = 0.5,
    rel_tol: float = 1e-12,
    patience: int = 50,
) -> FactorizationResult:
    """Limited-memory quasi-Newton over the concatenated mask values.

    Two-loop L-BFGS direction (memory `history_size`) with Armijo
    backtracking; the history of accepted objectives is non-increasing and
    the best iterate is returned.
    """
    if iters < 1:
        raise DomainError("iters must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    masks = tuple(masks)
    if init_values is None:
        start = sf_init(masks, seed)
    else:
        start = FactorSet(masks, tuple(np.asarray(v, dtype=np.float64) for v in init_values))
    x = np.concatenate(start.values) if start.values else np.zeros(0)
    engine = _ProductEngine(X, masks)

    def fg(vec: np.ndarray):
        f, grads = engine.fg(_split(vec, masks))
        return f, np.concatenate(grads)

    def fval(vec: np.ndarray) -> float:
        return engine.f(_split(vec, masks))

    t0 = time.perf_counter()
    f, g = fg(x)
    if not math.isfinite(f):
        raise ConstructionError("objective is not finite at the initial point")
    history = [f]
    best_f, best_x = f, x.copy()
    s_list: list[np.ndarray] = []
    y_list: list[np.ndarray] = []
    converged = False
    accepted = 0

    for _it in range(iters):
        if float(np.max(np.abs(g), initial=0.0)) < 1e-14:
            converged = True
            break
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s_vec, y_vec in zip(reversed(s_list), reversed(y_list)):
            rho = 1.0 / float(y_vec @ s_vec)
            a = rho * float(s_vec @ q)
            alphas.append((a, rho, s_vec, y_vec))
            q -= a * y_vec
        if y_list:
            gamma = float(s_list[-1] @ y_list[-1]) / float(y_list[-1] @ y_list[-1])
            q *= gamma
        for a, rho, s_vec, y_vec in reversed(alphas):
            b = rho * float(y_vec @ q)
            q += (a - b) * s_vec
        d = -q
        gd = float(g @ d)
        if gd >= 0:
            d = -g
            gd = float(g @ d)
            s_list.clear()
            y_list.clear()
            if gd >= 0:
                converged = True
                break
        # Armijo backtracking
        alpha = 1.0
        accepted_step = False
        for _ls in range(60):
            trial = x + alpha * d
            f_trial = fval(trial)
            if math.isfinite(f_trial) and f_trial <= f + armijo_c * alpha * gd:
                accepted_step = True
                break
            alpha *= shrink
        if not accepted_step:
            converged = True
            break
        x_new = trial
        f_new, g_new = fg(x_new)
        s_vec = x_new - x
        y_vec = g_new - g
        sy = float(s_vec @ y_vec)
        if sy > 1e-12 * float(np.linalg.norm(s_vec)) * float(np.linalg.norm(y_vec)):
            s_list.append(s_vec)
            y_list.append(y_vec)
            if len(s_list) > history_size:
                s_list.pop(0)
                y_list.pop(0)
        x, f, g = x_new, f_new, g_new
        accepted += 1
        history.append(f)
        if f < best_f:
            best_f, best_x = f, x.copy()
        if len(history) > patience:
            ref = history[-patience - 1]
            if ref > 0 and (ref - f) / max(ref, 1e-300) < rel_tol:
                converged = True
                break
            if ref == 0.0:
                converged = True
                break

    elapsed = time.perf_counter() - t0
    result_set = FactorSet(masks, _split(best_x, masks))
    return FactorizationResult(
        factors=result_set,
        history=tuple(history),
        final_fnorm=math.sqrt(max(best_f, 0.0)),
        iterations=accepted,
        elapsed=elapsed,
        converged=converged,
    )


# ---------------------------------------------------------------------------
# benchmark driver
# ---------------------------------------------------------------------------

METHODS = ("tsvd", "sf_chord", "sf_ldpc_peg", "sf_qc_sa")

REPORT_COLUMNS = (
    "dataset",
    "N",
    "method",
    "mask",
    "nnz",
    "iters",
    "seed",
    "fnorm_error",
    "seconds",
)


@dataclass(frozen=True)
class ReportRow:
    dataset: str
    N: int
    method: str
    mask: str
    nnz: int
    iters: int
    seed: int
    fnorm_error: float
    seconds: float

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in REPORT_COLUMNS}


def chord_mask_any(N: int) -> Mask:
    """Chord pattern generalised to non-powers of two: offsets 2^k mod N."""
    if N < 2:
        raise DomainError("N must be >= 2")
    if N & (N - 1) == 0:
        return chord_mask(N)
    p = math.ceil(math.log2(N))
    offsets = sorted({(1 << k) % N for k in range(p)} - {0})
    rows = tuple(tuple(sorted({(i + o) % N for o in offsets})) for i in range(N))
    return Mask(SparseBinaryMatrix(N, N, rows), "chord")


def _qc_block_size(N: int) -> int:
    for b in (1, 2, 3, 4, 5):
        if N % b == 0:
            return N // b
    return N


def mask_for_method(method: str, N: int, seed: int, budget: Budget) -> Mask:
    if method == "sf_chord":
        return chord_mask_any(N)
    if method == "sf_ldpc_peg":
        return square_ldpc_mask(N, degree=budget.K, seed=seed)
    if method == "sf_qc_sa":
        return square_qc_mask(N, L=_qc_block_size(N), seed=seed)
    raise DomainError(f"no mask for method '{method}'")


def benchmark(
    datasets: Sequence[tuple[str, Callable[[], np.ndarray]]],
    methods: Sequence[str] = METHODS,
    iters: int = 20_000,
    seeds: Sequence[int] = (0,),
    jobs: int = 1,
) -> list[ReportRow]:
    """Per (dataset, method, seed): F-norm error at matched nnz budgets.

    Dataset load failures become skipped rows (error NaN) and the run
    continues.  Row order is deterministic regardless of `jobs`.
    """
    for m in methods:
        if m not in METHODS:
            raise DomainError(f"unknown method '{m}'")

    tasks = []
    for name, loader in datasets:
        tasks.append((name, loader))

    def run_dataset(name: str, loader) -> list[ReportRow]:
        rows: list[ReportRow] = []
        try:
            X = np.asarray(loader() if callable(loader) else loader, dtype=np.float64)
            if X.ndim != 2 or X.shape[0] != X.shape[1]:
                raise DomainError("dataset matrix must be square")
        except Exception:
            for method in methods:
                for seed in seeds:
                    rows.append(ReportRow(name, 0, method, "", 0, 0, seed, math.nan, 0.0))
            return rows
        N = X.shape[0]
        budget = Budget.for_size(N)
        sf_masks: dict[str, Mask] = {}
        for method in methods:
            if method == "tsvd":
                continue
            for seed in seeds:
                sf_masks[f"{method}:{seed}"] = mask_for_method(method, N, seed, budget)
        # TSVD is budget-matched against the largest actual SF footprint
        sf_nnz_max = max(
            (m.nnz * budget.M for m in sf_masks.values()), default=budget.sf_nnz_nominal
        )
        for method in methods:
            for seed in seeds:
                t0 = time.perf_counter()
                if method == "tsvd":
                    r = budget.tsvd_rank_matching(sf_nnz_max)
                    res = tsvd(X, r)
                    rows.append(
                        ReportRow(
                            name, N, "tsvd", "", res.nnz, 0, seed,
                            res.error, time.perf_counter() - t0,
                        )
                    )
                    continue
                mask = sf_masks[f"{method}:{seed}"]
                opt = sf_optimize(X, [mask] * budget.M, iters=iters, seed=seed)
                rows.append(
                    ReportRow(
                        name, N, method, mask.provenance,
                        opt.factors.total_nnz, opt.iterations, seed,
                        opt.final_fnorm, time.perf_counter() - t0,
                    )
                )
        return rows

    all_rows: list[ReportRow] = []
    if jobs <= 1:
        for name, loader in tasks:
            all_rows.extend(run_dataset(name, loader))
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for rows in pool.map(lambda t: run_dataset(*t), tasks):
                all_rows.extend(rows)
    return all_rows

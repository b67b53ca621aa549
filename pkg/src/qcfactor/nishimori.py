"""Spin-glass instances on sparse graphs and Nishimori-temperature
estimation through the Bethe-Hessian's smallest eigenvalue."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DomainError, EstimationError, ParseError

DENSE_EIG_LIMIT = 800
SCAN_POINTS = 64
POLE_MARGIN = 1e-9


@dataclass(frozen=True)
class WeightedGraph:
    """Simple undirected graph with non-zero real couplings."""

    n: int
    edges: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        seen = set()
        for i, j, w in self.edges:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise DomainError("edge endpoint out of range")
            if i >= j:
                raise DomainError("edges must satisfy i < j")
            if w == 0.0:
                raise DomainError("couplings must be non-zero")
            if (i, j) in seen:
                raise DomainError(f"duplicate edge ({i},{j})")
            seen.add((i, j))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def coupling_array(self) -> np.ndarray:
        return np.array([w for _, _, w in self.edges], dtype=np.float64)

    def scale_couplings(self, factor: float) -> "WeightedGraph":
        return WeightedGraph(self.n, tuple((i, j, w * factor) for i, j, w in self.edges))


def write_graph(G: WeightedGraph, sink: IO[str]) -> None:
    sink.write(f"{G.n} {G.edge_count}\n")
    for i, j, w in G.edges:
        sink.write(f"{i} {j} {w!r}\n")


def read_graph(source: IO[str]) -> WeightedGraph:
    lines = source.read().splitlines()
    if not lines:
        raise ParseError("line 1: empty graph file")
    head = lines[0].split()
    if len(head) != 2:
        raise ParseError("line 1: expected 'n m'")
    n, m = int(head[0]), int(head[1])
    if len(lines) < 1 + m:
        raise ParseError(f"expected {m} edges, found {len(lines) - 1}")
    edges = []
    for k in range(m):
        toks = lines[1 + k].split()
        if len(toks) != 3:
            raise ParseError(f"line {2 + k}: expected 'i j J'")
        edges.append((int(toks[0]), int(toks[1]), float(toks[2])))
    return WeightedGraph(n, tuple(edges))


@dataclass(frozen=True)
class SpinGlassSample:
    graph: WeightedGraph
    beta_n: float
    family: str


def sample_spin_glass(
    n: int,
    avg_degree: float,
    family: str,
    beta_n: float,
    seed: int = 0,
    coupling_scale: float = 1.0,
) -> SpinGlassSample:
    """Erdos-Renyi edges (probability avg_degree/(n-1)) with couplings drawn
    from the tilted density p0(|x|) e^{beta_n x}.

    two_point: J = +-s, P(+s)/P(-s) = e^{2 beta_n s} with s = coupling_scale.
    gaussian_sym: p0 Gaussian(0, s^2); the tilt-normalised density is then
    Normal(beta_n s^2, s^2) in closed form.
    """
    if n < 2:
        raise DomainError("n must be >= 2")
    if not (0 < avg_degree < n):
        raise DomainError("avg_degree must lie in (0, n)")
    if coupling_scale <= 0 or not math.isfinite(coupling_scale):
        raise DomainError("coupling_scale must be positive and finite")
    if family not in ("two_point", "gaussian_sym"):
        raise DomainError(f"unknown family '{family}'")
    rng = np.random.default_rng(seed)
    p = avg_degree / (n - 1)
    iu, ju = np.triu_indices(n, k=1)
    take = rng.random(iu.size) < p
    iu, ju = iu[take], ju[take]
    m = iu.size
    if family == "two_point":
        s = coupling_scale
        p_plus = math.exp(beta_n * s) / (2.0 * math.cosh(beta_n * s))
        signs = np.where(rng.random(m) < p_plus, 1.0, -1.0)
        vals = signs * s
    else:
        sigma = coupling_scale
        vals = rng.normal(loc=beta_n * sigma**2, scale=sigma, size=m)
        vals[vals == 0.0] = sigma * 1e-12  # keep couplings non-zero
    edges = tuple((int(i), int(j), float(w)) for i, j, w in zip(iu, ju, vals))
    return SpinGlassSample(WeightedGraph(n, edges), beta_n, family)


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

def non_backtracking(G: WeightedGraph) -> np.ndarray:
    """Directed-edge operator B[(ij),(kl)] = delta_jk (1 - delta_il) w_kl."""
    if G.edge_count < 1:
        raise DomainError("graph must have at least one edge")
    directed = []
    for i, j, w in G.edges:
        directed.append((i, j, w))
        directed.append((j, i, w))
    out_of: dict[int, list[int]] = {}
    for idx, (a, b, _) in enumerate(directed):
        out_of.setdefault(a, []).append(idx)
    m2 = len(directed)
    B = np.zeros((m2, m2))
    for e1, (i, j, _) in enumerate(directed):
        for e2 in out_of.get(j, ()):
            k, l, w = directed[e2]
            if l != i:
                B[e1, e2] = w
    return B


def _omega_arrays(G: WeightedGraph, transform=None):
    adj: list[list[tuple[int, float]]] = [[] for _ in range(G.n)]
    for i, j, w in G.edges:
        v = transform(w) if transform else w
        adj[i].append((j, v))
        adj[j].append((i, v))
    return adj


def bethe_hessian_x(G: WeightedGraph, x: float, weights: Sequence[float] | None = None) -> np.ndarray:
    """H(x)_ij = delta_ij (1 + sum_k w_ik^2/(x^2-w_ik^2)) - x w_ij/(x^2-w_ij^2)."""
    om = np.array(weights, dtype=np.float64) if weights is not None else G.coupling_array()
    if om.shape != (G.edge_count,):
        raise DomainError("weights length mismatch")
    if np.any(np.abs(np.abs(om) - abs(x)) < POLE_MARGIN):
        raise DomainError(f"x={x} is at (or too close to) a pole +-w_ij")
    H = np.eye(G.n)
    for (i, j, _), w in zip(G.edges, om):
        denom = x * x - w * w
        H[i, i] += w * w / denom
        H[j, j] += w * w / denom
        H[i, j] -= x * w / denom
        H[j, i] -= x * w / denom
    return H


def bethe_hessian_beta(G: WeightedGraph, beta: float) -> np.ndarray:
    """Temperature form: bethe_hessian_x at x=1 with w_ij = tanh(beta J_ij)."""
    if beta < 0:
        raise DomainError("beta must be >= 0")
    om = np.tanh(beta * G.coupling_array())
    return bethe_hessian_x(G, 1.0, weights=om)


def _bethe_hessian_beta_sparse(G: WeightedGraph, beta: float) -> sp.csr_matrix:
    om = np.tanh(beta * G.coupling_array())
    denom = 1.0 - om * om
    n = G.n
    ii = np.fromiter((e[0] for e in G.edges), dtype=np.int64, count=G.edge_count)
    jj = np.fromiter((e[1] for e in G.edges), dtype=np.int64, count=G.edge_count)
    diag = np.ones(n)
    np.add.at(diag, ii, om * om / denom)
    np.add.at(diag, jj, om * om / denom)
    off = -om / denom
    rows = np.concatenate([ii, jj, np.arange(n)])
    cols = np.concatenate([jj, ii, np.arange(n)])
    vals = np.concatenate([off, off, diag])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _lanczos_start(n: int) -> np.ndarray:
    # fixed start vector keeps eigsh deterministic and leaves the global
    # RNG untouched
    return np.random.default_rng(0x5EED).standard_normal(n)


def lambda_min_beta(G: WeightedGraph, beta: float) -> float:
    """Smallest eigenvalue of the beta Bethe-Hessian (dense below the size
    threshold, Lanczos above)."""
    if G.n <= DENSE_EIG_LIMIT:
        return float(np.linalg.eigvalsh(bethe_hessian_beta(G, beta))[0])
    H = _bethe_hessian_beta_sparse(G, beta)
    try:
        vals = spla.eigsh(
            H, k=1, which="SA", tol=1e-8, maxiter=5000,
            v0=_lanczos_start(G.n), return_eigenvectors=False,
        )
        return float(vals[0])
    except (spla.ArpackNoConvergence, RuntimeError):
        return float(np.linalg.eigvalsh(H.toarray())[0])


def verify_ihara_bass(G: WeightedGraph, x: float) -> float:
    """Relative residual of det[xI - B] = det[H(x)] prod (x^2 - w_ij^2)."""
    om = G.coupling_array()
    if np.any(np.abs(np.abs(om) - abs(x)) < POLE_MARGIN):
        raise DomainError("x is at a pole")
    B = non_backtracking(G)
    lhs = np.linalg.det(x * np.eye(B.shape[0]) - B)
    rhs = np.linalg.det(bethe_hessian_x(G, x)) * float(np.prod(x * x - om * om))
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1.0)


# ---------------------------------------------------------------------------
# Nishimori temperature estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BetaEstimate:
    beta_hat: float
    bracket: tuple[float, float]
    scan: tuple[tuple[float, float], ...]


def beta_trace(G: WeightedGraph, betas: Sequence[float]) -> list[tuple[float, float]]:
    """(beta, lambda_min) pairs, e.g. for CSV export."""
    return [(float(b), lambda_min_beta(G, float(b))) for b in betas]


def estimate_beta_nishimori(
    G: WeightedGraph,
    beta_hi: float = 3.0,
    tol: float = 1e-3,
    scan_points: int = SCAN_POINTS,
    return_details: bool = False,
):
    """Largest root of beta -> lambda_min(H_beta) on (0, beta_hi].

    A uniform scan locates the last sign change; bisection refines it to
    the requested beta tolerance.  Raises EstimationError when lambda_min
    stays positive over the whole scan (paramagnetic at all scanned beta).
    """
    if beta_hi <= 0:
        raise DomainError("beta_hi must be positive")
    if tol <= 0:
        raise DomainError("tol must be positive")
    grid = np.linspace(0.0, beta_hi, scan_points + 1)
    vals = [1.0]  # lambda_min at beta=0 is exactly 1 (identity matrix)
    for b in grid[1:]:
        vals.append(lambda_min_beta(G, float(b)))
    scan = tuple((float(b), float(v)) for b, v in zip(grid, vals))

    def last_sign_change(xs, ys):
        for k in range(len(xs) - 1, 0, -1):
            if (ys[k - 1] >= 0.0) != (ys[k] >= 0.0):
                return (float(xs[k - 1]), float(xs[k]))
        return None

    bracket = last_sign_change(grid, vals)
    if bracket is None:
        # a shallow negative window can slip between coarse grid points:
        # rescan finely around the scan minimum before giving up
        k_min = int(np.argmin(vals[1:])) + 1
        lo_i, hi_i = max(0, k_min - 2), min(len(grid) - 1, k_min + 2)
        fine = np.linspace(grid[lo_i], grid[hi_i], scan_points + 1)
        fine_vals = [vals[lo_i] if fine[0] == grid[lo_i] else lambda_min_beta(G, float(fine[0]))]
        for b in fine[1:]:
            fine_vals.append(lambda_min_beta(G, float(b)))
        bracket = last_sign_change(fine, fine_vals)
    if bracket is None:
        raise EstimationError("no sign change: paramagnetic at all scanned beta")

    lo, hi = bracket
    f_lo = lambda_min_beta(G, lo) if lo > 0 else 1.0
    f_hi = lambda_min_beta(G, hi)
    if f_lo * f_hi > 0:
        raise EstimationError("scan bracket lost the sign change")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = lambda_min_beta(G, mid)
        if f_lo * f_mid <= 0:
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
    beta_hat = 0.5 * (lo + hi)
    if return_details:
        return BetaEstimate(beta_hat, bracket, scan)
    return beta_hat

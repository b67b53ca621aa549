"""Permanents and their Bethe approximation.

The belief-propagation model is the bipartite matching form: variables
x_i (column matched to row i) and y_j (row matched to column j), node
potentials sqrt(W), and pairwise indicators enforcing x_i = j <=> y_j = i.
exp(-min F_Bethe) approximates perm(W) from below for non-negative W.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .errors import DomainError

PERMANENT_GUARD = 20
_TINY = 1e-100


def _as_nonneg_square(W) -> np.ndarray:
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise DomainError("W must be a square matrix")
    if W.shape[0] < 1:
        raise DomainError("W must be at least 1x1")
    if np.any(W < 0) or not np.all(np.isfinite(W)):
        raise DomainError("W must be non-negative and finite")
    return W


def permanent_exact(W) -> float:
    """Ryser inclusion-exclusion permanent, n <= 20."""
    W = _as_nonneg_square(W)
    n = W.shape[0]
    if n > PERMANENT_GUARD:
        raise DomainError(f"permanent_exact limited to n <= {PERMANENT_GUARD}")
    total = 0.0
    ids = np.arange(1, 2**n, dtype=np.int64)
    chunk = 1 << 16
    powers = np.arange(n, dtype=np.int64)
    for lo in range(0, ids.size, chunk):
        sub = ids[lo : lo + chunk]
        bits = ((sub[:, None] >> powers) & 1).astype(np.float64)
        rowsums = bits @ W.T  # (chunk, n): sum_{j in S} W_ij
        prods = np.prod(rowsums, axis=1)
        signs = np.where(bits.sum(axis=1).astype(np.int64) % 2 == n % 2, 1.0, -1.0)
        total += float(signs @ prods)
    return total


# ---------------------------------------------------------------------------
# belief state and Bethe free energy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BeliefState:
    """Pairwise beliefs b[i,j,s,t] = b(x_i=s, y_j=t) plus node marginals."""

    pairwise: np.ndarray  # (n, n, n, n)
    bx: np.ndarray        # (n, n): bx[i, s] = b(x_i = s)
    by: np.ndarray        # (n, n): by[j, t] = b(y_j = t)

    @property
    def n(self) -> int:
        return self.bx.shape[0]

    def validate(self, tol: float = 1e-6) -> None:
        n = self.n
        if self.pairwise.shape != (n, n, n, n) or self.by.shape != (n, n):
            raise DomainError("belief state shape mismatch")
        if np.any(self.pairwise < -tol) or np.any(self.bx < -tol) or np.any(self.by < -tol):
            raise DomainError("beliefs must be non-negative")
        mass = self.pairwise.sum(axis=(2, 3))
        if not np.allclose(mass, 1.0, atol=tol):
            raise DomainError("each pairwise belief must have total mass 1")
        margin_x = self.pairwise.sum(axis=3)  # (i, j, s)
        margin_y = self.pairwise.sum(axis=2)  # (i, j, t)
        if not np.allclose(margin_x, self.bx[:, None, :], atol=tol):
            raise DomainError("pairwise beliefs inconsistent with x marginals")
        if not np.allclose(margin_y, self.by[None, :, :], atol=tol):
            raise DomainError("pairwise beliefs inconsistent with y marginals")


def psi_mask(n: int) -> np.ndarray:
    """psi[i,j,s,t] = 1 unless exactly one of (s==j), (t==i) holds."""
    i = np.arange(n)
    s_is_j = np.zeros((n, n, n, n), dtype=bool)
    t_is_i = np.zeros((n, n, n, n), dtype=bool)
    for jj in range(n):
        s_is_j[:, jj, jj, :] = True
    for ii in range(n):
        t_is_i[ii, :, :, ii] = True
    return ~(s_is_j ^ t_is_i)


def beliefs_from_doubly_stochastic(Q) -> BeliefState:
    """Locally consistent belief state from a doubly stochastic matrix.

    The pair (i, j) puts mass Q[i, j] on the joint match state and fills
    the compatible remainder with the product of the node marginals.
    """
    Q = np.asarray(Q, dtype=np.float64)
    n = Q.shape[0]
    if Q.shape != (n, n) or np.any(Q < -1e-12):
        raise DomainError("Q must be a non-negative square matrix")
    if not np.allclose(Q.sum(axis=0), 1.0, atol=1e-8) or not np.allclose(
        Q.sum(axis=1), 1.0, atol=1e-8
    ):
        raise DomainError("Q must be doubly stochastic")
    b4 = np.zeros((n, n, n, n))
    for i in range(n):
        for j in range(n):
            p = Q[i, j]
            b4[i, j, j, i] = p
            if p < 1.0:
                rest = np.outer(Q[i], Q[:, j]) / (1.0 - p)
                rest[j, :] = 0.0
                rest[:, i] = 0.0
                b4[i, j] += rest
    return BeliefState(b4, Q.copy(), Q.T.copy())


def _free_energy_raw(b: BeliefState, W: np.ndarray) -> float:
    n = W.shape[0]
    phi_x = np.sqrt(W)        # phi_x[i, s]
    phi_y = np.sqrt(W.T)      # phi_y[j, t] = sqrt(W[t, j])
    psi = psi_mask(n)
    if np.any((~psi) & (b.pairwise > 1e-12)):
        return math.inf
    e_node = -float(np.sum(xlogy(b.bx, phi_x))) - float(np.sum(xlogy(b.by, phi_y)))
    ent_pair = float(np.sum(xlogy(b.pairwise, b.pairwise)))
    ent_node = float(np.sum(xlogy(b.bx, b.bx))) + float(np.sum(xlogy(b.by, b.by)))
    return e_node + ent_pair - (n - 1) * ent_node


def bethe_free_energy(b: BeliefState, W) -> float:
    """Bethe free energy of a locally consistent belief state.

    Energy counts each node potential once; entropy uses the pairwise
    terms minus (n-1) times the node entropies (every node sits in n
    pairs).  exp(-min F) over consistent states is the Bethe permanent,
    a lower bound on perm(W)."""
    W = _as_nonneg_square(W)
    if b.n != W.shape[0]:
        raise DomainError("belief state and matrix size differ")
    b.validate()
    return _free_energy_raw(b, W)


# ---------------------------------------------------------------------------
# sum-product belief propagation
# ---------------------------------------------------------------------------

def _leave_one_out(v: np.ndarray) -> np.ndarray:
    """Products of all entries but one, division-free."""
    n = v.size
    pre = np.ones(n + 1)
    suf = np.ones(n + 1)
    for t in range(n):
        pre[t + 1] = pre[t] * v[t]
    for t in range(n - 1, -1, -1):
        suf[t] = suf[t + 1] * v[t]
    return pre[:n] * suf[1:]


def _leave_two_out(v: np.ndarray) -> np.ndarray:
    """(n, n) table of products excluding indices s and j (s != j)."""
    n = v.size
    out = np.empty((n, n))
    for j in range(n):
        mask = np.ones(n, dtype=bool)
        mask[j] = False
        loo = _leave_one_out(v[mask])
        col = np.empty(n)
        col[mask] = loo
        col[j] = np.nan
        out[:, j] = col
    return out


def _update_direction(phi_rows: np.ndarray, in_match: np.ndarray, in_not: np.ndarray):
    """One flooding half-step.

    phi_rows[i, s]: potential of variable i at value s (value index doubles
    as the partner index).  in_match/in_not[k, i]: normalised incoming pair
    components from partner k to variable i.  Returns the outgoing pairs
    (out_match[i, j], out_not[i, j]).
    """
    n = phi_rows.shape[0]
    out_m = np.empty((n, n))
    out_n = np.empty((n, n))
    for i in range(n):
        b = in_not[:, i]
        a = in_match[:, i]
        phi = phi_rows[i]
        c = phi * a
        L1 = _leave_one_out(b)
        vm = phi * L1
        T = float(c @ L1)
        vn = np.empty(n)
        safe = b > _TINY
        vn[safe] = (T - c[safe] * L1[safe]) / b[safe]
        for j in np.nonzero(~safe)[0]:
            mask = np.ones(n, dtype=bool)
            mask[j] = False
            vn[j] = float(c[mask] @ _leave_one_out(b[mask]))
        vn = np.maximum(vn, 0.0)
        Z = vm + vn
        ok = Z > 0
        out_m[i, ok] = vm[ok] / Z[ok]
        out_n[i, ok] = vn[ok] / Z[ok]
        out_m[i, ~ok] = 0.5
        out_n[i, ~ok] = 0.5
    return out_m, out_n


def _pair_residual(old_m, old_n, new_m, new_n) -> float:
    res = 0.0
    for old, new in ((old_m, new_m), (old_n, new_n)):
        both = (old > _TINY) & (new > _TINY)
        if np.any(both):
            res = max(res, float(np.max(np.abs(np.log(new[both]) - np.log(old[both])))))
        if np.any((old > _TINY) != (new > _TINY)):
            res = max(res, 1.0)
    return res


@dataclass(frozen=True)
class BpResult:
    f_bethe: float
    perm_bethe: float
    iterations: int
    converged: bool
    residual: float
    beliefs: BeliefState | None


def has_zero_line(W) -> bool:
    W = _as_nonneg_square(W)
    return bool(np.any(W.sum(axis=0) == 0) or np.any(W.sum(axis=1) == 0))


def bp_sum_product(W, damping: float = 0.5, tol: float = 1e-10, max_iter: int = 10_000) -> BpResult:
    """Sum-product BP for the Bethe permanent.

    Messages carry two values (partner matched / not matched), are damped
    geometrically (log-domain step `damping`), and iterate under a flooding
    schedule until the largest log-message change drops below tol.  A zero
    row or column short-circuits to the exact answer perm = 0.
    """
    W = _as_nonneg_square(W)
    if not (0.0 < damping <= 1.0):
        raise DomainError("damping must be in (0, 1]")
    if has_zero_line(W):
        return BpResult(math.inf, 0.0, 0, True, 0.0, None)
    n = W.shape[0]
    phi_x = np.sqrt(W)
    phi_y = np.sqrt(W.T)

    xm = np.full((n, n), 0.5)
    xn = np.full((n, n), 0.5)
    ym = np.full((n, n), 0.5)
    yn = np.full((n, n), 0.5)

    residual = math.inf
    iters = 0
    for iters in range(1, max_iter + 1):
        fresh_xm, fresh_xn = _update_direction(phi_x, ym, yn)
        fresh_ym, fresh_yn = _update_direction(phi_y, xm, xn)
        a = damping
        new_xm = xm ** (1 - a) * fresh_xm**a
        new_xn = xn ** (1 - a) * fresh_xn**a
        new_ym = ym ** (1 - a) * fresh_ym**a
        new_yn = yn ** (1 - a) * fresh_yn**a
        for pm, pn in ((new_xm, new_xn), (new_ym, new_yn)):
            Z = pm + pn
            ok = Z > 0
            pm[ok] /= Z[ok]
            pn[ok] /= Z[ok]
            pm[~ok] = 0.5
            pn[~ok] = 0.5
        residual = max(
            _pair_residual(xm, xn, new_xm, new_xn),
            _pair_residual(ym, yn, new_ym, new_yn),
        )
        xm, xn, ym, yn = new_xm, new_xn, new_ym, new_yn
        if residual < tol:
            break
    converged = residual < tol

    beliefs = _beliefs_from_messages(phi_x, phi_y, xm, xn, ym, yn)
    f = _free_energy_raw(beliefs, W)
    return BpResult(f, math.exp(-f), iters, converged, residual, beliefs)


def _beliefs_from_messages(phi_x, phi_y, xm, xn, ym, yn) -> BeliefState:
    n = phi_x.shape[0]
    bx = np.empty((n, n))
    by = np.empty((n, n))
    ux = np.empty((n, n, n))  # ux[i, j, s] = prod_{k != j} m_{y_k -> x_i}(s)
    uy = np.empty((n, n, n))  # uy[j, i, t] = prod_{l != i} m_{x_l -> y_j}(t)
    for i in range(n):
        a = ym[:, i]
        b = yn[:, i]
        L1 = _leave_one_out(b)
        L2 = _leave_two_out(b)
        vals = phi_x[i] * a * L1
        Z = vals.sum()
        bx[i] = vals / Z if Z > 0 else np.full(n, 1.0 / n)
        for j in range(n):
            col = a * L2[:, j]
            col[j] = L1[j]
            ux[i, j] = col
    for j in range(n):
        a = xm[:, j]
        b = xn[:, j]
        L1 = _leave_one_out(b)
        L2 = _leave_two_out(b)
        vals = phi_y[j] * a * L1
        Z = vals.sum()
        by[j] = vals / Z if Z > 0 else np.full(n, 1.0 / n)
        for i in range(n):
            col = a * L2[:, i]
            col[i] = L1[i]
            uy[j, i] = col
    psi = psi_mask(n)
    b4 = np.empty((n, n, n, n))
    for i in range(n):
        for j in range(n):
            raw = psi[i, j] * np.outer(phi_x[i] * ux[i, j], phi_y[j] * uy[j, i])
            Z = raw.sum()
            if Z > 0:
                b4[i, j] = raw / Z
            else:
                allowed = psi[i, j].astype(float)
                b4[i, j] = allowed / allowed.sum()
    return BeliefState(b4, bx, by)


# ---------------------------------------------------------------------------
# normalised min-sum matching
# ---------------------------------------------------------------------------

_MSG_CAP = 1e12


def _minsum_beliefs(phi: np.ndarray, my: np.ndarray) -> np.ndarray:
    """b(x_i=j) ~ phi(i,j) * m_{y_j -> x_i}, normalised per row."""
    raw = phi * my.T
    norm = raw.sum(axis=1, keepdims=True)
    norm[norm == 0] = 1.0
    return raw / norm


@dataclass(frozen=True)
class MinsumResult:
    messages_x: np.ndarray
    messages_y: np.ndarray
    beliefs_x: np.ndarray
    assignment: tuple[int, ...]
    iterations: int
    converged: bool
    residual: float


def minsum_matching(
    W, tol: float = 1e-10, max_iter: int = 10_000, damping: float = 0.5
) -> MinsumResult:
    """Scalar-message fixed point of the normalised update
    m_{x_i y_j} <- phi(x_i=j) / sum_{k != j} phi(x_i=k) m_{y_k x_i},
    with each message matrix renormalised by its maximum and damped
    geometrically (same alpha convention as bp_sum_product).  Row beliefs
    b(x_i=j) ~ phi(x_i=j) m_{y_j x_i}; the per-row argmax selects the
    matching."""
    W = _as_nonneg_square(W)
    if has_zero_line(W):
        raise DomainError("zero row or column: no perfect matching support")
    if not (0.0 < damping <= 1.0):
        raise DomainError("damping must be in (0, 1]")
    n = W.shape[0]
    phi = np.sqrt(W)
    mx = np.ones((n, n))
    my = np.ones((n, n))
    residual = math.inf
    iters = 0
    for iters in range(1, max_iter + 1):
        new_mx = np.empty((n, n))
        new_my = np.empty((n, n))
        for i in range(n):
            incoming = my[:, i]  # m_{y_k -> x_i}
            weights = phi[i] * incoming
            total = weights.sum()
            denom = total - weights
            with np.errstate(divide="ignore", invalid="ignore"):
                vals = phi[i] / denom
            vals[~np.isfinite(vals)] = _MSG_CAP
            new_mx[i] = np.minimum(vals, _MSG_CAP)
        for j in range(n):
            incoming = new_mx[:, j]
            weights = phi[:, j] * incoming
            total = weights.sum()
            denom = total - weights
            with np.errstate(divide="ignore", invalid="ignore"):
                vals = phi[:, j] / denom
            vals[~np.isfinite(vals)] = _MSG_CAP
            new_my[j] = np.minimum(vals, _MSG_CAP)
        a = damping
        new_mx = mx ** (1 - a) * new_mx**a
        new_my = my ** (1 - a) * new_my**a
        for mat in (new_mx, new_my):
            peak = mat.max()
            if peak > 0:
                mat /= peak
        # convergence is judged on the normalised beliefs: the message
        # ratios themselves may sit at the 0/inf boundary at a matching
        new_beliefs = _minsum_beliefs(phi, new_my)
        old_beliefs = _minsum_beliefs(phi, my)
        residual = float(np.max(np.abs(new_beliefs - old_beliefs)))
        mx, my = new_mx, new_my
        if residual < tol:
            break
    beliefs = _minsum_beliefs(phi, my)
    assignment = tuple(int(j) for j in beliefs.argmax(axis=1))
    return MinsumResult(mx, my, beliefs, assignment, iters, residual < tol, residual)


# ---------------------------------------------------------------------------
# cycle index of the symmetric group
# ---------------------------------------------------------------------------

def cycle_index(M: int, a) -> float:
    """Z(S_M) at variable values a_1..a_M via the standard recursion
    Z(S_M) = (1/M) sum_l a_l Z(S_{M-l}), Z(S_0) = 1."""
    if M < 0:
        raise DomainError("M must be >= 0")
    vals = list(a)
    if len(vals) < M:
        raise DomainError(f"need {M} variable values, got {len(vals)}")
    Z = [1] + [None] * M
    for t in range(1, M + 1):
        acc = 0
        for l in range(1, t + 1):
            acc = acc + vals[l - 1] * Z[t - l]
        Z[t] = acc / t
    return Z[M]

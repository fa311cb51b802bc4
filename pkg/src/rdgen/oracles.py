"""Independent brute-force oracles for the solver and bound evaluators.

These deliberately avoid the Blahut-Arimoto code path: rates are minimized by
exhaustive scans over channels whose rows live on a fixed simplex grid, and
the grid winner is optionally polished by a generic convex NLP (the objective
is convex in the channel, so a local polish from the global grid argmin is
exact). The ground truth stays independent of the solver under test.

A raw grid minimum carries an O(step^2) representation bias (the optimal
channel rarely sits on the grid); the polished value removes it.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit, prange
from scipy.optimize import minimize

from .errors import InputError


@dataclass
class GridMinResult:
    """Raw exhaustive-grid minimum and its convex-polished refinement."""

    raw: float
    polished: float
    argmin_rows: np.ndarray


def simplex_rows(n_out: int, step: float) -> np.ndarray:
    """All distributions over ``n_out`` symbols with entries on a ``step`` grid."""
    steps = int(round(1.0 / step))
    if abs(steps * step - 1.0) > 1e-9:
        raise InputError("simplex_rows: step must divide 1 evenly")

    def rec(parts, total):
        if parts == 1:
            return np.array([[total]], dtype=np.int64)
        out = []
        for v in range(total + 1):
            tail = rec(parts - 1, total - v)
            out.append(np.hstack([np.full((len(tail), 1), v, dtype=np.int64), tail]))
        return np.vstack(out)

    return rec(n_out, steps).astype(np.float64) / steps


@njit(cache=True)
def _row_entropies(rows):
    G = rows.shape[0]
    out = np.empty(G)
    for g in range(G):
        h = 0.0
        for k in range(rows.shape[1]):
            v = rows[g, k]
            if v > 1e-300:
                h -= v * np.log(v)
        out[g] = h
    return out


@njit(cache=True, parallel=True, fastmath=True)
def _scan_3x3(rows, row_h, rd0, rd1, rd2, p0, p1, p2, eps, init_best):
    """Exhaustive min of I(W;What) over 3-row grid channels with E[dist] <= eps.

    Rows are pre-sorted by rd2 so the innermost loop can stop at the
    feasibility prefix. ``shared`` carries the best objective seen by any
    thread; stale reads only weaken pruning, never correctness. Returns the
    per-thread-evaluated minima and the argmin row indices.
    """
    G = rows.shape[0]
    rd1_min = rd1.min()
    rd2_min = rd2.min()
    shared = np.full(1, init_best)
    own_best = np.full(G, np.inf)
    own_i2 = np.full(G, -1, dtype=np.int64)
    own_i3 = np.full(G, -1, dtype=np.int64)
    eps_eff = eps + 1e-9
    p12 = p0 + p1
    inv12 = 1.0 / p12
    for i1 in prange(G):
        prune = shared[0]
        local = np.inf
        rem1 = eps_eff - p0 * rd0[i1]
        if rem1 < p1 * rd1_min + p2 * rd2_min:
            continue
        m1a = p0 * rows[i1, 0]
        m1b = p0 * rows[i1, 1]
        m1c = p0 * rows[i1, 2]
        h1 = p0 * row_h[i1]
        for i2 in range(G):
            rem2 = rem1 - p1 * rd1[i2]
            if rem2 < p2 * rd2_min:
                continue
            cnt = np.searchsorted(rd2, rem2 / p2, side="right")
            if cnt == 0:
                continue
            ma = m1a + p1 * rows[i2, 0]
            mb = m1b + p1 * rows[i2, 1]
            mc = m1c + p1 * rows[i2, 2]
            h12 = h1 + p1 * row_h[i2]
            if cnt > 4:
                # concavity bound: H(q) >= p12*H(mix of first two rows) + p2*H(r3)
                lb = 0.0
                va = ma * inv12
                vb = mb * inv12
                vc = mc * inv12
                if va > 1e-300:
                    lb -= va * np.log(va)
                if vb > 1e-300:
                    lb -= vb * np.log(vb)
                if vc > 1e-300:
                    lb -= vc * np.log(vc)
                if p12 * lb - h12 >= prune:
                    continue
            for i3 in range(cnt):
                qa = ma + p2 * rows[i3, 0]
                qb = mb + p2 * rows[i3, 1]
                qc = mc + p2 * rows[i3, 2]
                h = 0.0
                if qa > 1e-300:
                    h -= qa * np.log(qa)
                if qb > 1e-300:
                    h -= qb * np.log(qb)
                if qc > 1e-300:
                    h -= qc * np.log(qc)
                obj = h - h12 - p2 * row_h[i3]
                if obj < local:
                    local = obj
                    own_i2[i1] = i2
                    own_i3[i1] = i3
                    if obj < prune:
                        prune = obj
                    if obj < shared[0]:
                        shared[0] = obj
        own_best[i1] = local
    return own_best, own_i2, own_i3


def _mutual_information_rows(p, rows):
    joint = p[:, None] * rows
    q = joint.sum(axis=0)
    terms = np.where(
        joint > 1e-300,
        joint * (np.log(np.maximum(rows, 1e-300)) - np.log(np.maximum(q, 1e-300))[None, :]),
        0.0,
    )
    return float(terms.sum())


def polish_channel_min(p, dist, epsilon, rows0):
    """Convex NLP polish of a channel minimizing I subject to E[dist] <= eps.

    The objective is convex in the channel and the constraints are linear,
    so SLSQP started from the global grid argmin reaches the true optimum.
    """
    p = np.asarray(p, dtype=np.float64)
    d = np.asarray(dist, dtype=np.float64)
    n_w, n_k = d.shape

    def unpack(x):
        return x.reshape(n_w, n_k)

    def objective(x):
        c = np.clip(unpack(x), 1e-12, 1.0)
        return _mutual_information_rows(p, c)

    def grad(x):
        c = np.clip(unpack(x), 1e-12, 1.0)
        q = p @ c
        g = p[:, None] * (np.log(c) - np.log(np.maximum(q, 1e-300))[None, :])
        return g.ravel()

    cons = [
        {"type": "eq", "fun": lambda x, w=w: unpack(x)[w].sum() - 1.0}
        for w in range(n_w)
    ]
    cons.append(
        {"type": "ineq", "fun": lambda x: epsilon - float(np.einsum("w,wk,wk->", p, unpack(x), d))}
    )
    res = minimize(
        objective,
        rows0.ravel(),
        jac=grad,
        bounds=[(0.0, 1.0)] * (n_w * n_k),
        constraints=cons,
        method="SLSQP",
        options={"maxiter": 400, "ftol": 1e-14},
    )
    c = unpack(res.x)
    c = np.clip(c, 0.0, None)
    c /= c.sum(axis=1, keepdims=True)
    achieved = float(np.einsum("w,wk,wk->", p, c, d))
    if achieved > epsilon + 1e-9:
        return None
    return _mutual_information_rows(p, c)


def grid_min_rate_3x3(p, dist, epsilon, step=0.02, coarse_step=0.1, polish=True):
    """Exhaustive channel-grid minimization of I(W;What) for a 3x3 problem.

    A coarse pass (whose grid is a subset of the fine one) seeds the pruning
    bound, then the full ``step`` grid is scanned. The polished value refines
    the grid argmin with a generic convex NLP; the raw value is the plain
    grid minimum.
    """
    p = np.asarray(p, dtype=np.float64)
    dist = np.asarray(dist, dtype=np.float64)
    if p.shape != (3,) or dist.shape != (3, 3):
        raise InputError("grid_min_rate_3x3: expects a 3-symbol source and 3x3 distortion")
    if int(round(coarse_step / step)) * step != coarse_step:
        coarse_step = step

    def scan(rows, init_best):
        rd = rows @ dist.T  # rd[g, w] = E[dist(w, .)] under row g
        order = np.argsort(rd[:, 2], kind="stable")
        rows_s = np.ascontiguousarray(rows[order])
        rd_s = rd[order]
        row_h = _row_entropies(rows_s)
        own_best, own_i2, own_i3 = _scan_3x3(
            rows_s,
            row_h,
            np.ascontiguousarray(rd_s[:, 0]),
            np.ascontiguousarray(rd_s[:, 1]),
            np.ascontiguousarray(rd_s[:, 2]),
            p[0],
            p[1],
            p[2],
            float(epsilon),
            init_best,
        )
        i1 = int(np.argmin(own_best))
        val = float(own_best[i1])
        arg = np.vstack(
            [rows_s[i1], rows_s[own_i2[i1]], rows_s[own_i3[i1]]]
        ) if np.isfinite(val) else None
        return val, arg

    coarse_val, _ = scan(simplex_rows(3, coarse_step), np.inf)
    raw, arg_rows = scan(simplex_rows(3, step), coarse_val)
    raw = min(raw, coarse_val)
    polished = raw
    if polish and arg_rows is not None:
        refined = polish_channel_min(p, dist, epsilon, arg_rows)
        if refined is not None and refined < polished:
            polished = refined
    return GridMinResult(raw=float(raw), polished=float(polished), argmin_rows=arg_rows)


def kernel_grid_min_rate_binary(p_source, values, lo, hi, step=0.02, chunk=400_000, polish=True):
    """Exhaustive grid minimization of I(S;What) for a binary reproduction.

    Each kernel row is (t, 1-t) with t on the grid; feasible when
    lo <= E[values(S, What)] <= hi. Returns raw and convex-polished minima
    (+inf if no grid kernel is feasible).
    """
    p = np.asarray(p_source, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    n_rows = p.size
    if v.shape != (n_rows, 2):
        raise InputError("kernel_grid_min_rate_binary: values must be [len(p), 2]")
    steps = int(round(1.0 / step))
    t_axis = np.arange(steps + 1, dtype=np.float64) / steps
    n_t = t_axis.size

    best = np.inf
    best_t = None
    total = n_t**n_rows
    idx = np.arange(total)
    for lo_i in range(0, total, chunk):
        sel = idx[lo_i : lo_i + chunk]
        digits = np.empty((sel.size, n_rows), dtype=np.int64)
        rem = sel.copy()
        for r in range(n_rows - 1, -1, -1):
            digits[:, r] = rem % n_t
            rem //= n_t
        t = t_axis[digits]  # [C, n_rows]
        e_val = (p[None, :] * (t * v[None, :, 0] + (1 - t) * v[None, :, 1])).sum(axis=1)
        feas = (e_val >= lo - 1e-12) & (e_val <= hi + 1e-12)
        if not feas.any():
            continue
        t = t[feas]
        q = t @ p  # output mass on symbol 0

        def xlx(a):
            return np.where(a > 1e-300, a * np.log(np.maximum(a, 1e-300)), 0.0)

        mi = (
            p[None, :]
            * (
                xlx(t)
                + xlx(1 - t)
                - t * np.log(np.maximum(q[:, None], 1e-300))
                - (1 - t) * np.log(np.maximum(1 - q[:, None], 1e-300))
            )
        ).sum(axis=1)
        j = int(np.argmin(mi))
        if mi[j] < best:
            best = float(mi[j])
            best_t = t[j].copy()
    polished = best
    if polish and best_t is not None:
        rows0 = np.stack([best_t, 1.0 - best_t], axis=1)
        refined = _polish_kernel_interval(p, v, lo, hi, rows0)
        if refined is not None and refined < polished:
            polished = refined
    return GridMinResult(
        raw=float(best),
        polished=float(polished),
        argmin_rows=None if best_t is None else np.stack([best_t, 1.0 - best_t], axis=1),
    )


def _polish_kernel_interval(p, values, lo, hi, rows0):
    """SLSQP polish of a binary-output kernel under a two-sided mean constraint."""
    n_rows = p.size

    def objective(t):
        rows = np.stack([np.clip(t, 1e-12, 1 - 1e-12), 1 - np.clip(t, 1e-12, 1 - 1e-12)], axis=1)
        return _mutual_information_rows(p, rows)

    def e_val(t):
        return float((p * (t * values[:, 0] + (1 - t) * values[:, 1])).sum())

    cons = [
        {"type": "ineq", "fun": lambda t: e_val(t) - lo},
        {"type": "ineq", "fun": lambda t: hi - e_val(t)},
    ]
    res = minimize(
        objective,
        rows0[:, 0],
        bounds=[(0.0, 1.0)] * n_rows,
        constraints=cons,
        method="SLSQP",
        options={"maxiter": 400, "ftol": 1e-14},
    )
    t = np.clip(res.x, 0.0, 1.0)
    if not (lo - 1e-9 <= e_val(t) <= hi + 1e-9):
        return None
    return objective(t)

"""Rate-distortion computation on finite alphabets.

The workhorse is Blahut-Arimoto alternating minimization at a fixed Lagrange
slope, wrapped by a slope bisection that pins a target expected distortion.
On top of that sit interval-constrained solves (needed when the constraint is
two-sided), the generalization-specific constrained rate (``rd_star``), the
KL-ball supremum (``marton_sup``), closed-form continuous families, and the
rate-distortion dimension estimator.

Conventions
-----------
* Rates are in nats, distortions in the caller's loss units.
* A positive slope ``s`` prices distortion: BA minimizes I + s * E[dist].
* Distortion matrices may carry negative entries (generalization-gap
  differences); BA's exponential tilt is shift invariant, so matrices are
  shifted to a nonnegative range internally and shifted back in reports.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, FeasibilityError, InputError, SizeError
from .infocore import Channel, JointTable, ProbVec, ZERO_TOL, kl_divergence_weights

# Pruned reproduction-marginal mass below this is treated as off-support.
SUPPORT_PRUNE = 1e-14

# Slack when checking that an achieved distortion meets its constraint.
DIST_SLACK = 1e-9


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass
class DistortionMatrix:
    """Per-symbol distortion table between a source and a reproduction alphabet."""

    row_labels: list
    col_labels: list
    cells: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.cells, dtype=np.float64)
        if c.ndim != 2 or c.shape != (len(self.row_labels), len(self.col_labels)):
            raise InputError("DistortionMatrix: cells shape must match label lists")
        if not np.all(np.isfinite(c)):
            raise InputError("DistortionMatrix: all entries must be finite")
        self.cells = c

    def to_json_dict(self):
        return {
            "row_labels": list(self.row_labels),
            "col_labels": list(self.col_labels),
            "cells": [[float(x) for x in row] for row in self.cells],
        }

    @classmethod
    def from_json_dict(cls, obj):
        for key in ("row_labels", "col_labels", "cells"):
            if not isinstance(obj, dict) or key not in obj:
                raise InputError("DistortionMatrix JSON must carry row_labels, col_labels, cells")
        return cls(obj["row_labels"], obj["col_labels"], obj["cells"])


@dataclass
class RdPoint:
    """One traced point of a rate-distortion curve.

    ``epsilon`` is the constraint level that was requested, ``distortion`` the
    expectation actually achieved by ``channel`` (never above ``epsilon`` by
    more than DIST_SLACK for upper constraints).
    """

    epsilon: float
    rate: float
    slope: float
    channel: Channel
    distortion: float = None
    iterations: int = 0

    def __post_init__(self):
        if self.rate < -1e-12:
            raise InputError("RdPoint: rate must be >= 0")
        self.rate = max(self.rate, 0.0)
        if self.distortion is None:
            self.distortion = self.epsilon

    def validate_against(self, source: ProbVec, dist: DistortionMatrix):
        """Recompute achieved distortion and check it meets the constraint."""
        achieved = channel_expected_distortion(source.weights, self.channel.rows, dist.cells)
        if achieved > self.epsilon + DIST_SLACK:
            raise InputError(
                f"RdPoint: achieved distortion {achieved} exceeds epsilon {self.epsilon}"
            )
        return achieved

    def to_json_dict(self):
        return {
            "epsilon": float(self.epsilon),
            "rate": float(self.rate),
            "slope": float(self.slope),
            "distortion": float(self.distortion),
            "channel": self.channel.to_json_dict(),
        }


@dataclass
class RdCurve:
    """Rate-distortion points sorted by distortion level."""

    points: list

    def __post_init__(self):
        eps = [p.epsilon for p in self.points]
        if any(b < a for a, b in zip(eps, eps[1:])):
            raise InputError("RdCurve: points must be sorted by epsilon")
        rates = [p.rate for p in self.points]
        if any(b > a + 1e-9 for a, b in zip(rates, rates[1:])):
            raise InputError("RdCurve: rate must be nonincreasing in epsilon")

    def check_convexity(self, slack=1e-6):
        """Midpoint convexity of rate as a function of epsilon."""
        pts = self.points
        for i in range(len(pts) - 2):
            e0, e1, e2 = pts[i].epsilon, pts[i + 1].epsilon, pts[i + 2].epsilon
            r0, r1, r2 = pts[i].rate, pts[i + 1].rate, pts[i + 2].rate
            if e2 - e0 < 1e-15:
                continue
            t = (e1 - e0) / (e2 - e0)
            chord = (1 - t) * r0 + t * r2
            if r1 > chord + slack:
                raise InputError("RdCurve: rate is not convex in epsilon")
        return True


@dataclass
class DimensionEstimate:
    """Least-squares slope of rate against log(1/epsilon)."""

    slope: float
    eps_grid: list
    fit_residual: float
    intercept: float = 0.0

    def __post_init__(self):
        grid = list(self.eps_grid)
        if any(b >= a for a, b in zip(grid, grid[1:])):
            raise InputError("DimensionEstimate: eps_grid must be strictly decreasing")
        if self.slope < -1e-9:
            raise InputError("DimensionEstimate: slope must be >= 0")
        self.slope = max(self.slope, 0.0)


@dataclass
class MartonSupResult:
    """KL-ball supremum of the constrained rate, with its achieving distribution."""

    rate: float
    argmax_q: JointTable
    method: str
    certificate: str  # "exact_grid" (dense scan) or "ascent_lower_bound"
    delta: float
    epsilon: float
    n_candidates: int = 0


# ---------------------------------------------------------------------------
# channel functionals
# ---------------------------------------------------------------------------

def channel_mutual_information(p, rows) -> float:
    """I(source; output) of a channel under source weights ``p``."""
    p = np.asarray(p, dtype=np.float64)
    rows = np.asarray(rows, dtype=np.float64)
    joint = p[:, None] * rows
    q = joint.sum(axis=0)
    pos = joint > ZERO_TOL
    val = float(np.sum(joint[pos] * (np.log(rows[np.where(pos)]) - np.log(q[np.where(pos)[1]]))))
    return max(val, 0.0)


def channel_expected_distortion(p, rows, dist) -> float:
    p = np.asarray(p, dtype=np.float64)
    return float(np.einsum("w,wk,wk->", p, np.asarray(rows), np.asarray(dist)))


# ---------------------------------------------------------------------------
# Blahut-Arimoto at a fixed slope
# ---------------------------------------------------------------------------

def _ba_sweep(p, neg_sd, logq):
    """One BA sweep: channel update then reproduction-marginal update.

    ``neg_sd`` is -slope * shifted distortion. Rows are computed through a
    stable softmax so arbitrarily large slopes are safe.
    """
    a = logq[None, :] + neg_sd
    a_max = a.max(axis=1, keepdims=True)
    rows = np.exp(a - a_max)
    rows /= rows.sum(axis=1, keepdims=True)
    q_new = p @ rows
    return rows, q_new


def _log_weights(q):
    logq = np.full_like(q, -np.inf)
    mask = q > 0
    logq[mask] = np.log(q[mask])
    return logq


def ba_fixed_slope(
    source: ProbVec,
    dist: DistortionMatrix,
    slope: float,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    q0=None,
) -> RdPoint:
    """Trace the rate-distortion envelope point at Lagrange slope ``slope``.

    Alternates the reproduction marginal q and the test channel
    c(k|w) being proportional to q(k) * exp(-slope * dist(w,k)) until the
    relative change of the Lagrangian rate + slope * distortion drops below
    ``tol``. The Lagrangian is checked to be nonincreasing on every sweep.
    """
    if slope < 0:
        raise InputError("ba_fixed_slope: slope must be >= 0")
    if tol <= 0:
        raise InputError("ba_fixed_slope: tol must be > 0")
    if source.labels != dist.row_labels:
        raise InputError("ba_fixed_slope: source labels must match distortion rows")
    p = source.weights
    d = dist.cells

    if slope == 0.0:
        # Zero slope ignores rate: the cheapest deterministic reproduction
        # is the single column with least expected distortion.
        col_means = p @ d
        j = int(np.argmin(col_means))
        rows = np.zeros_like(d)
        rows[:, j] = 1.0
        ch = Channel(source.labels, dist.col_labels, rows)
        return RdPoint(
            epsilon=float(col_means[j]),
            rate=0.0,
            slope=0.0,
            channel=ch,
            distortion=float(col_means[j]),
            iterations=0,
        )

    shift = d.min()
    d_shifted = d - shift
    neg_sd = -slope * d_shifted

    q = np.full(d.shape[1], 1.0 / d.shape[1]) if q0 is None else np.array(q0, dtype=np.float64)
    lagrangian_prev = np.inf
    rows = None
    for it in range(1, max_iter + 1):
        rows, q_new = _ba_sweep(p, neg_sd, _log_weights(q))
        rate = channel_mutual_information(p, rows)
        dist_val = channel_expected_distortion(p, rows, d_shifted)
        lagrangian = rate + slope * dist_val
        if lagrangian > lagrangian_prev + 1e-9 * max(1.0, abs(lagrangian_prev)):
            raise ConvergenceError(
                "ba_fixed_slope: Lagrangian increased, numerical breakdown",
                last_iterate=(rows, q_new),
            )
        converged = abs(lagrangian_prev - lagrangian) <= tol * max(1.0, abs(lagrangian))
        lagrangian_prev = lagrangian
        q = q_new
        q[q < SUPPORT_PRUNE] = 0.0
        q /= q.sum()
        if converged:
            ch = Channel(source.labels, dist.col_labels, rows)
            achieved = dist_val + shift
            return RdPoint(
                epsilon=float(achieved),
                rate=float(rate),
                slope=float(slope),
                channel=ch,
                distortion=float(achieved),
                iterations=it,
            )
    raise ConvergenceError(
        f"ba_fixed_slope: no convergence in {max_iter} iterations",
        last_iterate=(rows, q),
    )


# ---------------------------------------------------------------------------
# distortion-constrained solves
# ---------------------------------------------------------------------------

def _deterministic_min_rate(p, d, labels_in, labels_out, target):
    """Minimal rate at the bottom of the curve (constraint at min distortion).

    Only channels supported on row-wise minimal cells are feasible. A huge
    slope makes BA concentrate there, yielding the limiting rate.
    """
    row_min = d.min(axis=1, keepdims=True)
    mask_cost = (d - row_min > 1e-12).astype(np.float64)
    spread = 1.0
    big = 800.0 / spread
    src = ProbVec(labels_in, p)
    dm = DistortionMatrix(labels_in, labels_out, mask_cost)
    point = ba_fixed_slope(src, dm, big, tol=1e-13)
    gmin = float(p @ row_min.ravel())
    return RdPoint(
        epsilon=float(target),
        rate=point.rate,
        slope=float("inf"),
        channel=point.channel,
        distortion=gmin,
        iterations=point.iterations,
    )


def _blend_to_target(p, d, rows_lo, rows_hi, target):
    """Convex-combine two channels straddling ``target`` expected distortion.

    On a linear segment of the envelope the blend is exactly optimal; on a
    strictly convex arc the straddle is already bisection-tight.
    """
    d_lo = channel_expected_distortion(p, rows_lo, d)
    d_hi = channel_expected_distortion(p, rows_hi, d)
    if abs(d_lo - d_hi) < 1e-15:
        return rows_hi
    lam = (d_lo - target) / (d_lo - d_hi)
    lam = min(max(lam, 0.0), 1.0)
    return (1.0 - lam) * rows_lo + lam * rows_hi


def _solve_upper(source, dist, threshold, tol, max_iter, bisect_steps=80):
    """min I(W; What) subject to E[dist] <= threshold."""
    p = source.weights
    d = dist.cells
    col_means = p @ d
    g_min = float(p @ d.min(axis=1))
    g_max = float(p @ d.max(axis=1))
    if threshold < g_min - 1e-12:
        raise FeasibilityError(
            f"rd_at_distortion: epsilon {threshold} below achievable minimum {g_min}",
            achievable_range=(g_min, g_max),
        )
    if threshold >= col_means.min() - 1e-15:
        # A constant reproduction already meets the constraint: rate 0.
        j = int(np.argmin(col_means))
        rows = np.zeros_like(d)
        rows[:, j] = 1.0
        ch = Channel(source.labels, dist.col_labels, rows)
        return RdPoint(
            epsilon=float(threshold),
            rate=0.0,
            slope=0.0,
            channel=ch,
            distortion=float(col_means[j]),
        )
    if threshold <= g_min + 1e-12:
        return _deterministic_min_rate(p, d, source.labels, dist.col_labels, threshold)

    # Bracket the slope: distortion is nonincreasing in s.
    spread = float((d - d.min(axis=1, keepdims=True)).max())
    s_lo, s_hi = 0.0, 50.0 / (spread + 1.0)
    q_warm = None
    total_iters = 0

    def solve(s):
        nonlocal q_warm, total_iters
        # Mix a little uniform mass into the warm start: support pruned at one
        # slope must stay revivable at another (BA cannot resurrect exact zeros).
        q0 = None
        if q_warm is not None:
            q0 = 0.99 * q_warm + 0.01 / q_warm.size
        pt = ba_fixed_slope(source, dist, s, tol=tol, max_iter=max_iter, q0=q0)
        q_warm = pt.channel.rows.T @ p
        total_iters += pt.iterations
        return pt

    pt_hi = solve(s_hi)
    grow = 0
    while pt_hi.distortion > threshold and grow < 80:
        s_lo = s_hi
        s_hi *= 2.0
        pt_hi = solve(s_hi)
        grow += 1
    if pt_hi.distortion > threshold:
        raise ConvergenceError(
            "rd_at_distortion: could not bracket the slope", last_iterate=pt_hi
        )
    pt_lo = solve(s_lo) if s_lo > 0 else ba_fixed_slope(source, dist, 0.0)

    for _ in range(bisect_steps):
        s_mid = 0.5 * (s_lo + s_hi)
        pt_mid = solve(s_mid)
        if pt_mid.distortion > threshold:
            s_lo, pt_lo = s_mid, pt_mid
        else:
            s_hi, pt_hi = s_mid, pt_mid

    rows = _blend_to_target(p, d, pt_lo.channel.rows, pt_hi.channel.rows, threshold)
    rate = channel_mutual_information(p, rows)
    achieved = channel_expected_distortion(p, rows, d)
    ch = Channel(source.labels, dist.col_labels, rows)
    return RdPoint(
        epsilon=float(threshold),
        rate=float(rate),
        slope=float(s_hi),
        channel=ch,
        distortion=float(achieved),
        iterations=total_iters,
    )


def rd_at_distortion(
    source: ProbVec,
    dist: DistortionMatrix,
    epsilon: float = None,
    constraint="upper",
    tol: float = 1e-12,
    max_iter: int = 100_000,
) -> RdPoint:
    """Minimal mutual information subject to an expected-distortion constraint.

    ``constraint`` is either ``"upper"`` (E[dist] <= epsilon) or a pair
    ``(lo, hi)`` asking for lo <= E[dist] <= hi. Interval constraints arise
    from two-sided conditions on generalization-gap differences; both sides
    involve the same linear functional, so the active side is detected and
    solved as a one-sided problem with a signed effective slope.
    """
    if source.labels != dist.row_labels:
        raise InputError("rd_at_distortion: source labels must match distortion rows")
    p = source.weights
    d = dist.cells

    if constraint == "upper":
        if epsilon is None:
            raise InputError("rd_at_distortion: epsilon required for upper constraint")
        return _solve_upper(source, dist, float(epsilon), tol, max_iter)

    try:
        lo, hi = float(constraint[0]), float(constraint[1])
    except (TypeError, ValueError, IndexError):
        raise InputError("rd_at_distortion: constraint must be 'upper' or (lo, hi)") from None
    if lo > hi:
        raise InputError("rd_at_distortion: interval constraint needs lo <= hi")

    g_min = float(p @ d.min(axis=1))
    g_max = float(p @ d.max(axis=1))
    if hi < g_min - 1e-12 or lo > g_max + 1e-12:
        raise FeasibilityError(
            f"rd_at_distortion: interval [{lo}, {hi}] misses achievable range "
            f"[{g_min}, {g_max}]",
            achievable_range=(g_min, g_max),
        )

    col_means = p @ d
    c_lo, c_hi = float(col_means.min()), float(col_means.max())
    if lo <= c_hi + 1e-15 and hi >= c_lo - 1e-15:
        # Rate 0: mix the extreme constant reproductions to land inside.
        target = min(max(c_lo, lo), hi)
        j_min, j_max = int(np.argmin(col_means)), int(np.argmax(col_means))
        lam = 0.0 if c_hi == c_lo else (target - c_lo) / (c_hi - c_lo)
        lam = min(max(lam, 0.0), 1.0)
        q = np.zeros(d.shape[1])
        q[j_min] += 1.0 - lam
        q[j_max] += lam
        rows = np.tile(q, (d.shape[0], 1))
        ch = Channel(source.labels, dist.col_labels, rows)
        achieved = channel_expected_distortion(p, rows, d)
        pt = RdPoint(epsilon=hi, rate=0.0, slope=0.0, channel=ch, distortion=float(achieved))
        return pt

    if hi < c_lo:
        # Only the upper side can bind.
        return _solve_upper(source, dist, hi, tol, max_iter)

    # Only the lower side binds: E[dist] >= lo, i.e. E[-dist] <= -lo.
    neg = DistortionMatrix(dist.row_labels, dist.col_labels, -d)
    pt = _solve_upper(source, neg, -lo, tol, max_iter)
    achieved = channel_expected_distortion(p, pt.channel.rows, d)
    return RdPoint(
        epsilon=hi,
        rate=pt.rate,
        slope=-pt.slope,
        channel=pt.channel,
        distortion=float(achieved),
        iterations=pt.iterations,
    )


def trace_curve(source, dist, eps_values, tol=1e-12) -> RdCurve:
    """rd_at_distortion across a grid of distortion levels."""
    pts = [rd_at_distortion(source, dist, e, tol=tol) for e in sorted(eps_values)]
    return RdCurve(pts)


def sweep_envelope(source: ProbVec, dist: DistortionMatrix, n_slopes: int = 240, tol: float = 1e-11):
    """Trace the whole curve by one warm-started geometric slope sweep.

    Returns (distortions, rates) sorted by distortion, anchored at the exact
    bottom of the curve and at the rate-0 point. Chord interpolation between
    the returned points is achievable by time sharing, so it upper-bounds the
    true envelope everywhere; callers that need many thresholds cheaply use
    this instead of one bisection per threshold.
    """
    p = source.weights
    d = dist.cells
    col_means = p @ d
    col_min = float(col_means.min())
    g_min = float(p @ d.min(axis=1))
    ds = [col_min]
    rs = [0.0]
    if col_min - g_min > 1e-14:
        spread = float((d - d.min(axis=1, keepdims=True)).max()) + 1e-12
        slopes = np.geomspace(1e-3 / spread, 2000.0 / spread, n_slopes)
        q_warm = None
        for s in slopes:
            q0 = None if q_warm is None else 0.99 * q_warm + 0.01 / q_warm.size
            pt = ba_fixed_slope(source, dist, float(s), tol=tol, q0=q0)
            q_warm = pt.channel.rows.T @ p
            ds.append(pt.distortion)
            rs.append(pt.rate)
        bottom = _deterministic_min_rate(p, d, source.labels, dist.col_labels, g_min)
        ds.append(g_min)
        rs.append(bottom.rate)
    order = np.argsort(ds)
    ds_arr = np.asarray(ds)[order]
    rs_arr = np.asarray(rs)[order]
    # keep the best rate at numerically equal distortions
    keep_d, keep_r = [], []
    for dval, rval in zip(ds_arr, rs_arr):
        if keep_d and dval - keep_d[-1] < 1e-15:
            keep_r[-1] = min(keep_r[-1], rval)
        else:
            keep_d.append(dval)
            keep_r.append(rval)
    return np.asarray(keep_d), np.asarray(keep_r)


def envelope_rate_at(distortions, rates, threshold: float) -> float:
    """Achievable rate at an upper distortion constraint, by chord interpolation."""
    if threshold >= distortions[-1]:
        return 0.0
    if threshold < distortions[0] - 1e-12:
        raise FeasibilityError(
            f"envelope_rate_at: threshold {threshold} below curve bottom {distortions[0]}"
        )
    t = max(threshold, distortions[0])
    j = int(np.searchsorted(distortions, t, side="right"))
    d0, d1 = distortions[j - 1], distortions[j]
    r0, r1 = rates[j - 1], rates[j]
    if d1 - d0 < 1e-18:
        return float(min(r0, r1))
    lam = (t - d0) / (d1 - d0)
    return float((1 - lam) * r0 + lam * r1)


# ---------------------------------------------------------------------------
# closed-form families
# ---------------------------------------------------------------------------

def closed_form_rd(family: str, params: dict, epsilon: float) -> float:
    """Closed-form rate-distortion values for three continuous families.

    gaussian_sq
        d i.i.d. N(0, sigma2) coordinates, total squared-error budget epsilon:
        rate = max(0, d/2 * log(d * sigma2 / epsilon)).
    bernoulli_hamming
        d i.i.d. uniform bits, total Hamming budget epsilon:
        rate = d * (log 2 - h_b(epsilon / d)) for epsilon/d <= 1/2, else 0.
    laplace_l1
        d i.i.d. two-sided exponential (scale 1/lam) coordinates, total L1
        budget epsilon: rate = max(0, d * log(d / (lam * epsilon))).
    """
    from .infocore import binary_entropy

    if family == "gaussian_sq":
        d = int(params.get("d", 1))
        sigma2 = float(params["sigma2"])
        if d < 1 or sigma2 <= 0:
            raise InputError("closed_form_rd: gaussian_sq needs d >= 1, sigma2 > 0")
        if epsilon <= 0:
            raise InputError("closed_form_rd: gaussian_sq needs epsilon > 0")
        return max(0.0, 0.5 * d * np.log(d * sigma2 / epsilon))
    if family == "bernoulli_hamming":
        d = int(params.get("d", 1))
        if d < 1:
            raise InputError("closed_form_rd: bernoulli_hamming needs d >= 1")
        if epsilon < 0:
            raise InputError("closed_form_rd: bernoulli_hamming needs epsilon >= 0")
        x = epsilon / d
        if x >= 0.5:
            return 0.0
        return d * (np.log(2.0) - binary_entropy(x))
    if family == "laplace_l1":
        d = int(params.get("d", 1))
        lam = float(params["lam"])
        if d < 1 or lam <= 0:
            raise InputError("closed_form_rd: laplace_l1 needs d >= 1, lam > 0")
        if epsilon <= 0:
            raise InputError("closed_form_rd: laplace_l1 needs epsilon > 0")
        return max(0.0, d * np.log(d / (lam * epsilon)))
    raise InputError(f"closed_form_rd: unknown family {family!r}")


def rd_dimension_estimate(rd_fn, eps_grid) -> DimensionEstimate:
    """Fit rate = slope * log(1/eps) + intercept over a decreasing eps grid."""
    grid = [float(e) for e in eps_grid]
    if len(grid) < 3:
        raise InputError("rd_dimension_estimate: need at least 3 grid points")
    if any(e <= 0 for e in grid):
        raise InputError("rd_dimension_estimate: all grid points must be > 0")
    if any(b >= a for a, b in zip(grid, grid[1:])):
        raise InputError("rd_dimension_estimate: eps_grid must be strictly decreasing")
    x = np.log(1.0 / np.asarray(grid))
    y = np.asarray([float(rd_fn(e)) for e in grid])
    design = np.stack([x, np.ones_like(x)], axis=1)
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    resid = float(np.sqrt(np.mean((design @ coef - y) ** 2)))
    return DimensionEstimate(
        slope=float(coef[0]), eps_grid=grid, fit_residual=resid, intercept=float(coef[1])
    )


# ---------------------------------------------------------------------------
# generalization-flavored constrained rate and its KL-ball supremum
# ---------------------------------------------------------------------------

def _gen_floor(q_cells, gen_cells, w_of_col):
    """Smallest gap value over the support of a joint table."""
    supp = q_cells > ZERO_TOL
    if not supp.any():
        raise InputError("rd_star: joint distribution has empty support")
    vals = gen_cells[:, w_of_col]
    return float(vals[supp].min())


def rd_star(
    Q: JointTable,
    gen_table: DistortionMatrix,
    epsilon: float,
    tol: float = 1e-12,
) -> RdPoint:
    """Constrained rate: min I(S; What) s.t. E[floor - gen(S, What)] <= epsilon.

    ``floor`` is the smallest gap value on the support of ``Q``. The hypothesis
    columns of ``gen_table`` must contain the W alphabet of ``Q`` so the floor
    can be read off the table.
    """
    if gen_table.row_labels != Q.row_labels:
        raise InputError("rd_star: gen_table rows must match the joint's S alphabet")
    col_index = {lab: k for k, lab in enumerate(gen_table.col_labels)}
    try:
        w_of_col = [col_index[w] for w in Q.col_labels]
    except KeyError as exc:
        raise InputError(f"rd_star: hypothesis {exc} missing from gen_table columns") from None

    c_star = _gen_floor(Q.cells, gen_table.cells, w_of_col)
    source = Q.row_marginal()
    d_q = DistortionMatrix(
        gen_table.row_labels, gen_table.col_labels, c_star - gen_table.cells
    )
    return rd_at_distortion(source, d_q, float(epsilon), tol=tol)


def _compositions(n_parts, total):
    """All integer compositions of ``total`` into ``n_parts`` parts, lexicographic."""
    if n_parts == 1:
        return np.array([[total]], dtype=np.int64)
    blocks = []
    for v in range(total + 1):
        tail = _compositions(n_parts - 1, total - v)
        head = np.full((tail.shape[0], 1), v, dtype=np.int64)
        blocks.append(np.hstack([head, tail]))
    return np.vstack(blocks)


def _iter_simplex_grid(n_cells, steps):
    """Yield lexicographic grid blocks of the probability simplex.

    Blocks keep memory bounded on fine grids (the full composition count
    grows like steps**(n_cells-1)).
    """
    if n_cells == 1:
        yield np.array([[1.0]])
        return
    if n_cells <= 3:
        yield _compositions(n_cells, steps).astype(np.float64) / steps
        return
    for v in range(steps + 1):
        tail = _compositions(n_cells - 1, steps - v).astype(np.float64)
        head = np.full((tail.shape[0], 1), float(v))
        yield np.hstack([head, tail]) / steps


def _batched_rd_star_rates(
    p_s_batch, g2, thresholds, tol=1e-9, sweep_cap=4000, bisect_steps=60
):
    """Vectorized upper-constrained solves sharing one distortion matrix.

    ``g2`` is the negated gap table (rows S, cols What); candidate ``b`` solves
    min I(S; What) s.t. E[g2] <= thresholds[b] under source p_s_batch[b].
    Row-wise shifts of g2 move every expectation by a channel-independent
    constant, so rows are normalized to min 0 and thresholds adjusted.
    """
    B, S = p_s_batch.shape
    K = g2.shape[1]
    row_min = g2.min(axis=1)
    g = g2 - row_min[:, None]
    thr = thresholds - p_s_batch @ row_min
    rates = np.zeros(B)

    col_means = p_s_batch @ g
    rate_zero = thr >= col_means.min(axis=1) - 1e-15
    active = ~rate_zero
    infeasible = thr < -1e-9
    if infeasible.any():
        raise FeasibilityError("marton_sup: a candidate rate problem is infeasible")

    exact_floor = active & (thr <= 1e-12)
    for b in np.nonzero(exact_floor)[0]:
        src = ProbVec(list(range(S)), p_s_batch[b])
        dm = DistortionMatrix(list(range(S)), list(range(K)), g)
        rates[b] = _solve_upper(src, dm, float(thr[b]), tol=1e-12, max_iter=100_000).rate
    active &= ~exact_floor
    idx = np.nonzero(active)[0]
    if idx.size == 0:
        return rates

    p_act = p_s_batch[idx]  # [A, S]
    t_act = thr[idx]  # [A]
    A = idx.size
    spread = float(g.max()) + 1.0

    def ba_converge(s_vec, q_init):
        """Run warm-started BA at per-candidate slopes until the dual settles."""
        q = q_init.copy()
        f_prev = np.full(A, np.inf)
        for _ in range(sweep_cap):
            logq = np.where(q > 0, np.log(np.maximum(q, 1e-300)), -np.inf)
            a = logq[:, None, :] - s_vec[:, None, None] * g[None, :, :]  # [A,S,K]
            a_max = a.max(axis=2, keepdims=True)
            ex = np.exp(a - a_max)
            z = ex.sum(axis=2)
            f = -np.einsum("as,as->a", p_act, a_max[:, :, 0] + np.log(z))
            rows = ex / z[:, :, None]
            q = np.einsum("as,ask->ak", p_act, rows)
            q[q < SUPPORT_PRUNE] = 0.0
            q /= q.sum(axis=1, keepdims=True)
            if np.all(np.abs(f_prev - f) <= tol * np.maximum(1.0, np.abs(f))):
                break
            f_prev = f
        dist_val = np.einsum("as,ask,sk->a", p_act, rows, g)
        return rows, q, dist_val

    q0 = np.full((A, K), 1.0 / K)
    s_hi = np.full(A, 50.0 / spread)
    rows_hi, q_hi, d_hi = ba_converge(s_hi, q0)
    for _ in range(60):
        bad = d_hi > t_act
        if not bad.any():
            break
        s_hi[bad] *= 2.0
        rows_new, q_new, d_new = ba_converge(s_hi, q_hi)
        rows_hi, q_hi, d_hi = rows_new, q_new, d_new
    # Zero-slope end of the bracket: the best constant reproduction.
    s_lo = np.zeros(A)
    rows_lo = np.zeros_like(rows_hi)
    j_best = np.argmin(p_act @ g, axis=1)
    rows_lo[np.arange(A), :, :] = 0.0
    rows_lo[np.arange(A)[:, None], np.arange(S)[None, :], j_best[:, None]] = 1.0
    d_lo = np.einsum("as,ask,sk->a", p_act, rows_lo, g)

    q_warm = q_hi
    for _ in range(bisect_steps):
        s_mid = 0.5 * (s_lo + s_hi)
        rows_mid, q_warm, d_mid = ba_converge(s_mid, q_warm)
        above = d_mid > t_act
        s_lo = np.where(above, s_mid, s_lo)
        s_hi = np.where(above, s_hi, s_mid)
        rows_lo = np.where(above[:, None, None], rows_mid, rows_lo)
        d_lo = np.where(above, d_mid, d_lo)
        rows_hi = np.where(above[:, None, None], rows_hi, rows_mid)
        d_hi = np.where(above, d_hi, d_mid)

    gap = d_lo - d_hi
    lam = np.where(np.abs(gap) < 1e-15, 1.0, (d_lo - t_act) / np.where(gap == 0, 1.0, gap))
    lam = np.clip(lam, 0.0, 1.0)
    rows = (1.0 - lam)[:, None, None] * rows_lo + lam[:, None, None] * rows_hi

    joint = p_act[:, :, None] * rows
    qm = joint.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        logr = np.where(joint > ZERO_TOL, np.log(np.maximum(rows, 1e-300)), 0.0)
        logqm = np.where(joint > ZERO_TOL, np.log(np.maximum(qm[:, None, :], 1e-300)), 0.0)
    rates_act = np.einsum("ask,ask->a", joint, logr - logqm)
    rates[idx] = np.maximum(rates_act, 0.0)
    return rates


def _kl_ball_filter(block, cells, radius):
    """Rows of ``block`` (over supp cells) whose KL to ``cells`` fits the ball."""
    supp = cells > ZERO_TOL
    p_supp = cells[supp]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(block > ZERO_TOL, block * (np.log(np.maximum(block, 1e-300)) - np.log(p_supp)[None, :]), 0.0)
    kl = terms.sum(axis=1)
    return block[kl <= radius + 1e-12]


def _batch_mutual_informations(mats):
    """I(S;W) of a stack of joint tables, vectorized."""
    def h(w):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(w > ZERO_TOL, w * np.log(np.maximum(w, 1e-300)), 0.0)
        return -t.sum(axis=-1)

    h_rows = h(mats.sum(axis=2))
    h_cols = h(mats.sum(axis=1))
    h_joint = h(mats.reshape(mats.shape[0], -1))
    return np.maximum(h_rows + h_cols - h_joint, 0.0)


def marton_sup(
    P: JointTable,
    gen_table: DistortionMatrix,
    epsilon: float,
    delta: float,
    method: str = "grid",
    grid_step: float = 0.02,
    ascent_iters: int = 300,
    seed: int = 0,
) -> MartonSupResult:
    """Supremum of the constrained rate over the KL ball around ``P``.

    The ball has radius log(1/delta); delta = 1 collapses it to {P}. The grid
    method scans a dense simplex grid restricted to the support of P (a ball
    member must be absolutely continuous w.r.t. P) and is the ground-truth
    oracle at desk scale; mirror ascent returns a certified-feasible member
    and therefore a lower bound on the supremum.
    """
    if not 0.0 < delta <= 1.0:
        raise InputError("marton_sup: delta must lie in (0, 1]; delta=0 has infinite radius")
    n_cells = len(P.row_labels) * len(P.col_labels)
    if method == "grid" and n_cells > 9:
        raise SizeError("marton_sup: grid method limited to |S x W| <= 9 cells")
    if gen_table.row_labels != P.row_labels:
        raise InputError("marton_sup: gen_table rows must match P's S alphabet")

    col_index = {lab: k for k, lab in enumerate(gen_table.col_labels)}
    try:
        w_of_col = [col_index[w] for w in P.col_labels]
    except KeyError as exc:
        raise InputError(f"marton_sup: hypothesis {exc} missing from gen_table") from None

    shape = P.cells.shape
    gen_on_w = gen_table.cells[:, w_of_col]  # gap values on the S x W cells
    g2 = -gen_table.cells  # E[floor - gen] <= eps <=> E[-gen] <= eps - floor

    def batch_rates(cand_flat):
        mats = cand_flat.reshape(-1, *shape)
        p_s = mats.sum(axis=2)
        supp = mats > ZERO_TOL
        floors = np.where(supp, gen_on_w[None, :, :], np.inf).min(axis=(1, 2))
        thresholds = epsilon - floors
        return _batched_rd_star_rates(p_s, g2, thresholds)

    if method == "grid":
        if epsilon < 0:
            raise InputError("marton_sup: grid method requires epsilon >= 0")
        cells = P.cells.ravel()
        supp_idx = np.nonzero(cells > ZERO_TOL)[0]
        steps = int(round(1.0 / grid_step))
        if abs(steps * grid_step - 1.0) > 1e-9:
            raise InputError("marton_sup: grid_step must divide 1 evenly")
        radius = np.log(1.0 / delta)

        # P itself belongs to every ball; it seeds the running max and the
        # I_Q <= best pruning rule (the constrained rate never exceeds I_Q).
        best_rate = float(batch_rates(cells.reshape(1, -1))[0])
        best_q = cells.copy()
        n_candidates = 1
        chunk = 200_000
        for block in _iter_simplex_grid(len(supp_idx), steps):
            kept = _kl_ball_filter(block, cells[supp_idx], radius)
            if kept.size == 0:
                continue
            full = np.zeros((kept.shape[0], cells.size))
            full[:, supp_idx] = kept
            mi = _batch_mutual_informations(full.reshape(-1, *shape))
            full = full[mi > best_rate + 1e-15]
            n_candidates += len(full)
            for lo_i in range(0, len(full), chunk):
                part = full[lo_i : lo_i + chunk]
                rates = batch_rates(part)
                j = int(np.argmax(rates))
                if rates[j] > best_rate:
                    best_rate = float(rates[j])
                    best_q = part[j].copy()
        q_best = JointTable(P.row_labels, P.col_labels, best_q.reshape(shape))
        return MartonSupResult(
            rate=best_rate,
            argmax_q=q_best,
            method="grid",
            certificate="exact_grid",
            delta=delta,
            epsilon=epsilon,
            n_candidates=n_candidates,
        )

    if method == "mirror_ascent":
        return _marton_mirror_ascent(
            P, gen_table, epsilon, delta, g2, w_of_col, ascent_iters, seed
        )

    raise InputError(f"marton_sup: unknown method {method!r}")


def _kl_ball_project(q, p, radius):
    """Pull q toward p along the exponential path until KL(q_t || p) <= radius."""
    if kl_divergence_weights(q, p) <= radius:
        return q

    def path(t):
        logs = np.where(p > 0, (1 - t) * np.log(np.maximum(p, 1e-300)), -np.inf)
        logs = logs + np.where(q > 0, t * np.log(np.maximum(q, 1e-300)), -np.inf)
        w = np.exp(logs - logs.max())
        w[(p <= 0) | (q <= 0)] = 0.0
        return w / w.sum()

    t_lo, t_hi = 0.0, 1.0
    for _ in range(80):
        t_mid = 0.5 * (t_lo + t_hi)
        if kl_divergence_weights(path(t_mid), p) <= radius:
            t_lo = t_mid
        else:
            t_hi = t_mid
    return path(t_lo)


def _marton_mirror_ascent(P, gen_table, epsilon, delta, g2, w_of_col, iters, seed):
    cells = P.cells.ravel()
    supp = cells > ZERO_TOL
    radius = np.log(1.0 / delta)
    shape = P.cells.shape
    rng = np.random.default_rng(seed)

    def rate_of(flat):
        q = JointTable(P.row_labels, P.col_labels, flat.reshape(shape))
        return rd_star(q, gen_table, epsilon).rate

    q = cells.copy()
    best_q, best_rate = q.copy(), rate_of(q)
    fd = 1e-5
    for it in range(iters):
        # multiplicative-weights ascent on a finite-difference gradient
        grad = np.zeros_like(q)
        base = rate_of(q)
        for i in np.nonzero(supp)[0]:
            pert = q.copy()
            pert[i] += fd
            pert /= pert.sum()
            grad[i] = (rate_of(pert) - base) / fd
        if np.max(np.abs(grad)) < 1e-12:
            break
        step = 0.5 / (1.0 + 0.1 * it)
        nxt = q * np.exp(step * (grad - grad.max()))
        nxt[~supp] = 0.0
        nxt /= nxt.sum()
        nxt = _kl_ball_project(nxt, cells, radius)
        r = rate_of(nxt)
        if r > best_rate:
            best_rate, best_q = r, nxt.copy()
        q = nxt
        if it > 20 and np.max(np.abs(nxt - q)) < 1e-12:
            break

    q_tab = JointTable(P.row_labels, P.col_labels, best_q.reshape(shape))
    assert kl_divergence_weights(best_q, cells) <= radius + 1e-9
    return MartonSupResult(
        rate=float(best_rate),
        argmax_q=q_tab,
        method="mirror_ascent",
        certificate="ascent_lower_bound",
        delta=delta,
        epsilon=epsilon,
        n_candidates=iters,
    )

"""Monte Carlo block-coding simulator and identity checkers.

The simulator draws blocks of source realizations and measures how often a
random codebook fails to cover them within a distortion slack. Codebooks are
i.i.d. per coordinate from a reproduction marginal, so the failure
probability of one trial given its source block is (1 - pi)^l with pi the
single-codeword coverage probability. Two evaluation paths:

explicit
    materialize the codebook and count failures (the literal experiment);
    only possible while the codebook fits in memory.
analytic
    compute pi exactly per trial (the block distortions are sums of
    independent per-coordinate terms) and average the conditional failure
    probabilities. This is the same estimand with the codebook randomness
    integrated out, and it is the only way to reach the rates and block
    lengths where codebook sizes are astronomically large. Log-scale
    failure probabilities are reported alongside, since the interesting
    regime underflows float64.

The identity checkers validate the variational machinery the bounds rest on:
a change-of-measure inequality, a variational form of the mean, the
restricted-support form of the log tail probability, and the two-term block
tail decomposition.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import InputError, SizeError
from .harness import FiniteProblem, enumerate_joint, gen_table, kernel_matrix
from .infocore import ProbVec, kl_divergence, kl_divergence_weights
from .oracles import simplex_rows
from .rd_solver import DistortionMatrix, rd_at_distortion, rd_star

EXPLICIT_CODEBOOK_CAP = 10**7
EXPLICIT_WORK_CAP = 2 * 10**9  # l * m * trials guard for the literal path


# ---------------------------------------------------------------------------
# block distortions
# ---------------------------------------------------------------------------

def rho_distortion(a, b) -> float:
    """min(a) - mean(b): the asymmetric block distortion behind the tail bounds."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 1:
        raise InputError("rho_distortion: sequences must share a length >= 1")
    return float(a.min() - b.mean())


def block_distortion(kind: str, gen_w, gen_what) -> float:
    """Block distortion between gap sequences of the original and compressed runs.

    theta: mean of coordinate-wise differences. abs_theta: |theta|.
    phi: rho_distortion (min of the first sequence minus mean of the second;
    phi <= theta on every input pair since a min never exceeds a mean).
    """
    a = np.asarray(gen_w, dtype=np.float64)
    b = np.asarray(gen_what, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 1:
        raise InputError("block_distortion: sequences must share a length >= 1")
    if kind == "theta":
        return float((a - b).mean())
    if kind == "abs_theta":
        return float(abs((a - b).mean()))
    if kind == "phi":
        return rho_distortion(a, b)
    raise InputError(f"block_distortion: unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# sum-distribution machinery (log space, value-lattice merged)
# ---------------------------------------------------------------------------

def _atom_dist(values, log_probs, res):
    keys = np.round(np.asarray(values, dtype=np.float64) / res).astype(np.int64)
    order = np.argsort(keys)
    keys, log_probs = keys[order], np.asarray(log_probs)[order]
    uniq, inverse = np.unique(keys, return_inverse=True)
    out = np.full(uniq.size, -np.inf)
    np.logaddexp.at(out, inverse, log_probs)
    return uniq, out


def _conv(d1, d2, cap):
    k1, l1 = d1
    k2, l2 = d2
    keys = (k1[:, None] + k2[None, :]).ravel()
    lps = (l1[:, None] + l2[None, :]).ravel()
    uniq, inverse = np.unique(keys, return_inverse=True)
    if uniq.size > cap:
        raise SizeError(
            f"covering: sum-distribution support {uniq.size} exceeds cap {cap}; "
            "use the explicit codebook path or a lattice-valued distortion"
        )
    out = np.full(uniq.size, -np.inf)
    np.logaddexp.at(out, inverse, lps)
    return uniq, out


def _power(dist, count, cap):
    """count-fold self-convolution by binary exponentiation."""
    result = None
    base = dist
    while count > 0:
        if count & 1:
            result = base if result is None else _conv(result, base, cap)
        count >>= 1
        if count:
            base = _conv(base, base, cap)
    return result


def _log_tail_geq(dist, threshold_key):
    keys, lps = dist
    j = int(np.searchsorted(keys, threshold_key, side="left"))
    if j >= keys.size:
        return -np.inf
    return float(logsumexp(lps[j:]))


def _log_window(dist, lo_key, hi_key):
    keys, lps = dist
    a = int(np.searchsorted(keys, lo_key, side="left"))
    b = int(np.searchsorted(keys, hi_key, side="right"))
    if a >= b:
        return -np.inf
    return float(logsumexp(lps[a:b]))


class _SumDistCache:
    """Per-symbol coordinate distributions composed by source-type counts."""

    def __init__(self, per_symbol_dists, res, cap=4 * 10**6):
        self.per_symbol = per_symbol_dists  # list of (keys, logps)
        self.res = res
        self.cap = cap
        self._cache = {}

    def for_counts(self, counts):
        key = tuple(int(c) for c in counts)
        if key in self._cache:
            return self._cache[key]
        result = None
        for sym, count in enumerate(key):
            if count == 0:
                continue
            part = _power(self.per_symbol[sym], count, self.cap)
            result = part if result is None else _conv(result, part, self.cap)
        if result is None:
            raise InputError("covering: empty block")
        self._cache[key] = result
        return result


# ---------------------------------------------------------------------------
# covering specification and simulation
# ---------------------------------------------------------------------------

@dataclass
class Codebook:
    """Explicit hypothesis book: l codewords of block length m."""

    m: int
    entries: np.ndarray  # [l, m] reproduction-symbol indices
    rate: float

    def __post_init__(self):
        e = np.asarray(self.entries)
        if e.ndim != 2 or e.shape[1] != self.m or e.shape[0] < 1:
            raise InputError("Codebook: entries must be [l, m] with l >= 1")
        if e.shape[0] > math.exp(self.m * self.rate) + 1:
            raise InputError("Codebook: size exceeds exp(m * rate) + 1")
        self.entries = e


@dataclass
class SimResult:
    """Covering-failure frequencies per block length.

    error_freq averages, over trials, the per-trial codebook-failure
    probability; with an explicit codebook that is the literal failure
    indicator, on the analytic path it is the probability itself with the
    codebook randomness integrated out. log_error_freq carries the same
    numbers in log scale, which stays ordered long after float64 underflow.
    """

    m_values: list
    error_freq: list
    log_error_freq: list
    stderr: list
    trials: int
    seed: int
    distortion_kind: str
    rate: float
    epsilon: float
    mode: list
    codebook_log_sizes: list

    def __post_init__(self):
        if self.trials < 1:
            raise InputError("SimResult: trials must be >= 1")
        for f in self.error_freq:
            if not -1e-12 <= f <= 1.0 + 1e-12:
                raise InputError("SimResult: error_freq must lie in [0, 1]")


@dataclass
class _CoveringSpec:
    """Per-coordinate reduction of a covering experiment.

    Source symbols x carry probabilities, an anchor value a(x), and a row
    b(x, k) of per-reproduction values; the three block-distortion kinds all
    reduce to threshold events on sums of b over the block.
    """

    probs: np.ndarray  # [n_x]
    a_vals: np.ndarray  # [n_x]
    b_table: np.ndarray  # [n_x, n_k]
    codebook_marginal: np.ndarray  # [n_k]


def _spec_from_problem(problem, epsilon, kind, codebook_source):
    joint = enumerate_joint(problem)
    probs = joint.cells.ravel()
    gaps = gen_table(problem)
    n_s, n_w = gaps.shape
    # x enumerates (dataset, hypothesis) pairs; b depends on the dataset only
    a_vals = gaps.ravel()
    b_table = np.repeat(gaps, n_w, axis=0)

    if codebook_source == "uniform":
        q = np.full(n_w, 1.0 / n_w)
    elif codebook_source == "ba_marginal":
        src = ProbVec(joint.row_labels, problem.dataset_probs())
        dist = DistortionMatrix(joint.row_labels, list(problem.w_labels), gaps)
        kernel = kernel_matrix(problem)
        t0 = float((problem.dataset_probs()[:, None] * kernel * gaps).sum())
        if kind == "phi":
            pt = rd_star(joint, dist, epsilon)
        elif kind == "theta":
            pt = rd_at_distortion(src, dist, constraint=(t0 - epsilon, np.inf))
        else:
            pt = rd_at_distortion(src, dist, constraint=(t0 - epsilon, t0 + epsilon))
        q = pt.channel.rows.T @ src.weights
        q = np.maximum(q, 0.0)
        q /= q.sum()
    else:
        raise InputError(f"simulate_covering: unknown codebook_source {codebook_source!r}")
    return _CoveringSpec(probs=probs, a_vals=a_vals, b_table=b_table, codebook_marginal=q)


def _spec_from_source(source, dist, epsilon, codebook_source):
    # classical covering of the source itself: a = 0, b = -distortion, so the
    # theta event mean(a - b) > eps is exactly mean distortion > eps
    if codebook_source == "uniform":
        q = np.full(len(dist.col_labels), 1.0 / len(dist.col_labels))
    elif codebook_source == "ba_marginal":
        pt = rd_at_distortion(source, dist, epsilon)
        q = pt.channel.rows.T @ source.weights
        q = np.maximum(q, 0.0)
        q /= q.sum()
    else:
        raise InputError(f"simulate_covering: unknown codebook_source {codebook_source!r}")
    return _CoveringSpec(
        probs=source.weights.copy(),
        a_vals=np.zeros(len(source.labels)),
        b_table=-dist.cells,
        codebook_marginal=q,
    )


def _coverage_log_prob(spec, cache, counts, kind, epsilon, res):
    """log P(one random codeword covers the block), given the block's type."""
    m = int(counts.sum())
    sum_a = float(counts @ spec.a_vals)
    dist = cache.for_counts(counts)
    tol = 1e-9 * max(1.0, abs(sum_a) + abs(m * epsilon))
    if kind == "theta":
        thr = (sum_a - m * epsilon - tol) / res
        return _log_tail_geq(dist, int(math.ceil(thr)))
    if kind == "abs_theta":
        lo = int(math.ceil((sum_a - m * epsilon - tol) / res))
        hi = int(math.floor((sum_a + m * epsilon + tol) / res))
        return _log_window(dist, lo, hi)
    if kind == "phi":
        min_a = float(spec.a_vals[counts > 0].min())
        thr = (m * (min_a - epsilon) - tol) / res
        return _log_tail_geq(dist, int(math.ceil(thr)))
    raise InputError(f"simulate_covering: unknown kind {kind!r}")


def draw_codebook(spec_marginal, l, m, rng) -> np.ndarray:
    return rng.choice(spec_marginal.size, size=(l, m), p=spec_marginal)


def _log_failure_prob(log_l, log_pi):
    """log[(1 - pi)^l] with l given as log(l); exact across the huge-l regime."""
    if log_pi >= -1e-15:
        return -np.inf  # coverage certain, failure impossible
    # log(1 - pi): below pi ~ 1e-17 the linearization is exact in double
    log_one_minus = (
        math.log1p(-math.exp(log_pi)) if log_pi > -37.0 else -math.exp(log_pi)
    )
    if log_one_minus == 0.0:
        return 0.0  # pi == 0: no codeword can ever cover
    if log_l <= 700.0:
        return math.exp(log_l) * log_one_minus
    return -np.inf  # l beyond float range with pi > 0: failure prob underflows


def _simulate_spec(spec, rate, epsilon, kind, m_values, trials, seed, mode):
    scale = max(1.0, np.abs(spec.b_table).max(), np.abs(spec.a_vals).max())
    res = scale * 1e-12
    log_q = np.where(
        spec.codebook_marginal > 0, np.log(np.maximum(spec.codebook_marginal, 1e-300)), -np.inf
    )
    per_symbol = [
        _atom_dist(spec.b_table[x], log_q, res) for x in range(spec.probs.size)
    ]

    error_freq, log_error_freq, stderrs, modes, log_sizes = [], [], [], [], []
    for m in m_values:
        log_l = m * rate
        exact_l = math.ceil(math.exp(log_l)) if log_l < 36 else None
        use_explicit = (
            mode == "explicit"
            or (
                mode == "auto"
                and exact_l is not None
                and exact_l <= EXPLICIT_CODEBOOK_CAP
                and exact_l * m * trials <= EXPLICIT_WORK_CAP
            )
        )
        if mode == "explicit" and (exact_l is None or exact_l > EXPLICIT_CODEBOOK_CAP):
            raise SizeError(
                f"simulate_covering: codebook size exp({m}*{rate}) exceeds "
                f"{EXPLICIT_CODEBOOK_CAP}; reduce m or the rate, or use the analytic path"
            )
        if use_explicit:
            cb_rng = np.random.default_rng([seed, m, 2**31 + 1])
            book = Codebook(
                m=m,
                entries=draw_codebook(spec.codebook_marginal, exact_l, m, cb_rng),
                rate=rate,
            )
            code = book.entries
            log_sizes.append(math.log(exact_l))
            fails = np.zeros(trials)
            for t in range(trials):
                rng = np.random.default_rng([seed, m, t])
                xs = rng.choice(spec.probs.size, size=m, p=spec.probs)
                a_seq = spec.a_vals[xs]
                b_sums = spec.b_table[xs[None, :], code].sum(axis=1)
                sum_a = a_seq.sum()
                tol = 1e-9 * max(1.0, abs(sum_a) + abs(m * epsilon))
                if kind == "theta":
                    covered = b_sums >= sum_a - m * epsilon - tol
                elif kind == "abs_theta":
                    covered = (b_sums >= sum_a - m * epsilon - tol) & (
                        b_sums <= sum_a + m * epsilon + tol
                    )
                else:
                    covered = b_sums >= m * (a_seq.min() - epsilon) - tol
                fails[t] = 0.0 if covered.any() else 1.0
            freq = float(fails.mean())
            error_freq.append(freq)
            log_error_freq.append(math.log(freq) if freq > 0 else -np.inf)
            stderrs.append(float(fails.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0)
            modes.append("explicit")
        else:
            cache = _SumDistCache(per_symbol, res)
            log_f = np.empty(trials)
            for t in range(trials):
                rng = np.random.default_rng([seed, m, t])
                xs = rng.choice(spec.probs.size, size=m, p=spec.probs)
                counts = np.bincount(xs, minlength=spec.probs.size)
                log_pi = min(
                    _coverage_log_prob(spec, cache, counts, kind, epsilon, res), 0.0
                )
                log_f[t] = _log_failure_prob(log_l, log_pi)
            log_sizes.append(log_l)
            f_lin = np.exp(np.clip(log_f, -745.0, 0.0))
            error_freq.append(float(f_lin.mean()))
            log_error_freq.append(float(logsumexp(log_f) - math.log(trials)))
            stderrs.append(float(f_lin.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0)
            modes.append("analytic")
    return SimResult(
        m_values=list(m_values),
        error_freq=error_freq,
        log_error_freq=log_error_freq,
        stderr=stderrs,
        trials=trials,
        seed=seed,
        distortion_kind=kind,
        rate=rate,
        epsilon=epsilon,
        mode=modes,
        codebook_log_sizes=log_sizes,
    )


def simulate_covering(
    problem: FiniteProblem,
    rate: float,
    epsilon: float,
    kind: str,
    m_values,
    trials: int = 2000,
    seed: int = 0,
    codebook_source: str = "ba_marginal",
    mode: str = "auto",
) -> SimResult:
    """Covering-failure frequencies for blocks of (dataset, hypothesis) pairs.

    Codewords are drawn i.i.d. per coordinate from the reproduction marginal
    of the matching constrained solve at ``epsilon`` (or uniformly). Results
    are bit-identical for a given seed; trials derive their generators from
    (seed, m, trial), so comparisons across rates at a fixed seed are paired.
    """
    if rate < 0:
        raise InputError("simulate_covering: rate must be >= 0")
    if trials < 1:
        raise InputError("simulate_covering: trials must be >= 1")
    spec = _spec_from_problem(problem, epsilon, kind, codebook_source)
    return _simulate_spec(spec, rate, epsilon, kind, m_values, trials, seed, mode)


def simulate_source_covering(
    source: ProbVec,
    dist: DistortionMatrix,
    rate: float,
    epsilon: float,
    m_values,
    trials: int = 2000,
    seed: int = 0,
    codebook_source: str = "ba_marginal",
    mode: str = "auto",
) -> SimResult:
    """Classical covering of a plain source under a distortion table.

    This is the degenerate problem mapped to source coding: anchors are zero
    and the block event is mean distortion > epsilon.
    """
    if source.labels != dist.row_labels:
        raise InputError("simulate_source_covering: source labels must match distortion rows")
    if rate < 0:
        raise InputError("simulate_source_covering: rate must be >= 0")
    spec = _spec_from_source(source, dist, epsilon, codebook_source)
    return _simulate_spec(spec, rate, epsilon, "theta", m_values, trials, seed, mode)


# ---------------------------------------------------------------------------
# block tail decomposition checker
# ---------------------------------------------------------------------------

@dataclass
class BlockTailReport:
    lhs: float
    term_mean: float
    term_rho: float
    rhs: float
    margin: float
    stderr: float
    holds: bool
    mode: str
    details: dict = field(default_factory=dict)


def _quantizer_coord_dist(quantizer, x_label):
    """Distribution of one quantizer coordinate given the source coordinate."""
    kind = quantizer.get("kind")
    if kind == "constant":
        return np.array([float(quantizer["value"])]), np.array([0.0])
    if kind == "iid":
        dist = quantizer["dist"]
        w = dist.weights
        pos = w > 0
        return (
            np.asarray([float(v) for v in dist.labels])[pos],
            np.log(w[pos]),
        )
    if kind == "conditional":
        dist = quantizer["table"][x_label]
        w = dist.weights
        pos = w > 0
        return (
            np.asarray([float(v) for v in dist.labels])[pos],
            np.log(w[pos]),
        )
    raise InputError(f"verify_block_tail: unknown quantizer kind {kind!r}")


def verify_block_tail(
    x_spec: ProbVec,
    quantizers,
    threshold: float,
    epsilon: float,
    m: int,
    trials: int = 10**5,
    seed: int = 0,
    mode: str = "closed_form",
) -> BlockTailReport:
    """Check P(X >= t)^m <= P(exists j: mean quantizer >= t - eps) + P(all j: rho > eps).

    closed_form mode enumerates source types and computes every probability
    exactly; monte_carlo samples all three indicator events. Quantizer
    coordinates are independent across j and across coordinates, conditionally
    on the source block for the conditional kind.
    """
    if trials < 1:
        raise InputError("verify_block_tail: trials must be >= 1")
    x_vals = np.asarray([float(v) for v in x_spec.labels])
    p_tail = float(x_spec.weights[x_vals >= threshold].sum())
    lhs = p_tail**m

    if mode == "closed_form":
        n_x = len(x_vals)
        scale = max(
            1.0,
            max(
                abs(v)
                for q in quantizers
                for v in _all_quantizer_values(q, x_spec.labels)
            ),
        )
        res = scale * 1e-12
        caches = []
        for q in quantizers:
            dists = [_quantizer_coord_dist(q, x_spec.labels[i]) for i in range(n_x)]
            per_symbol = [_atom_dist(v, lp, res) for v, lp in dists]
            caches.append(_SumDistCache(per_symbol, res))

        term1 = 0.0
        term2 = 0.0
        log_mu = np.where(x_spec.weights > 0, np.log(np.maximum(x_spec.weights, 1e-300)), -np.inf)
        for counts in itertools.product(range(m + 1), repeat=n_x):
            if sum(counts) != m:
                continue
            counts = np.asarray(counts)
            if np.any((counts > 0) & (x_spec.weights <= 0)):
                continue
            log_type = (
                math.lgamma(m + 1)
                - sum(math.lgamma(c + 1) for c in counts)
                + float(counts @ log_mu)
            )
            p_type = math.exp(log_type)
            min_x = float(x_vals[counts > 0].min())
            no_hit = 1.0
            all_rho = 1.0
            for cache in caches:
                dist = cache.for_counts(counts)
                tol = 1e-9 * max(1.0, abs(m * (threshold - epsilon)))
                thr1 = int(math.ceil((m * (threshold - epsilon) - tol) / res))
                p_ge = math.exp(min(_log_tail_geq(dist, thr1), 0.0))
                no_hit *= 1.0 - p_ge
                tol2 = 1e-9 * max(1.0, abs(m * (min_x - epsilon)))
                thr2 = int(math.ceil((m * (min_x - epsilon) - tol2) / res))
                p_rho_fail = math.exp(min(_log_tail_geq(dist, thr2), 0.0))
                all_rho *= max(0.0, 1.0 - p_rho_fail)
            term1 += p_type * (1.0 - no_hit)
            term2 += p_type * all_rho
        rhs = term1 + term2
        margin = rhs - lhs
        return BlockTailReport(
            lhs=lhs,
            term_mean=term1,
            term_rho=term2,
            rhs=rhs,
            margin=margin,
            stderr=0.0,
            holds=margin >= -1e-12,
            mode="closed_form",
        )

    if mode != "monte_carlo":
        raise InputError(f"verify_block_tail: unknown mode {mode!r}")
    rng = np.random.default_rng([seed])
    xs_idx = rng.choice(len(x_vals), size=(trials, m), p=x_spec.weights)
    xs = x_vals[xs_idx]
    hit_any = np.zeros(trials, dtype=bool)
    rho_all = np.ones(trials, dtype=bool)
    for q in quantizers:
        draws = _sample_quantizer(q, x_spec, xs_idx, rng)
        means = draws.mean(axis=1)
        hit_any |= means >= threshold - epsilon
        rho = xs.min(axis=1) - means
        rho_all &= rho > epsilon
    term1 = float(hit_any.mean())
    term2 = float(rho_all.mean())
    se = math.sqrt(
        term1 * (1 - term1) / trials + term2 * (1 - term2) / trials
    )
    rhs = term1 + term2
    margin = rhs - lhs
    return BlockTailReport(
        lhs=lhs,
        term_mean=term1,
        term_rho=term2,
        rhs=rhs,
        margin=margin,
        stderr=se,
        holds=margin >= -3.0 * se - 1e-12,
        mode="monte_carlo",
    )


def _all_quantizer_values(q, labels):
    kind = q.get("kind")
    if kind == "constant":
        return [float(q["value"])]
    if kind == "iid":
        return [float(v) for v in q["dist"].labels]
    if kind == "conditional":
        return [float(v) for lab in labels for v in q["table"][lab].labels]
    raise InputError(f"verify_block_tail: unknown quantizer kind {kind!r}")


def _sample_quantizer(q, x_spec, xs_idx, rng):
    trials, m = xs_idx.shape
    kind = q.get("kind")
    if kind == "constant":
        return np.full((trials, m), float(q["value"]))
    if kind == "iid":
        dist = q["dist"]
        vals = np.asarray([float(v) for v in dist.labels])
        idx = rng.choice(vals.size, size=(trials, m), p=dist.weights)
        return vals[idx]
    if kind == "conditional":
        out = np.empty((trials, m))
        for i, lab in enumerate(x_spec.labels):
            mask = xs_idx == i
            k = int(mask.sum())
            if k == 0:
                continue
            dist = q["table"][lab]
            vals = np.asarray([float(v) for v in dist.labels])
            out[mask] = vals[rng.choice(vals.size, size=k, p=dist.weights)]
        return out
    raise InputError(f"verify_block_tail: unknown quantizer kind {kind!r}")


# ---------------------------------------------------------------------------
# variational identity checkers
# ---------------------------------------------------------------------------

@dataclass
class DvReport:
    lhs: float  # KL divergence
    rhs: float  # E_q[phi] - log E_p[exp(phi)]
    gap: float
    holds: bool


def dv_check(p: ProbVec, q: ProbVec, phi) -> DvReport:
    """Change-of-measure inequality: KL(q||p) >= E_q[phi] - log E_p[e^phi]."""
    if p.labels != q.labels:
        raise InputError("dv_check: distributions must share the alphabet")
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != p.weights.shape:
        raise InputError("dv_check: phi must match the alphabet size")
    lhs = kl_divergence(q, p)
    shift = phi.max()
    log_mgf = shift + math.log(float(np.sum(p.weights * np.exp(phi - shift))))
    rhs = float(np.sum(q.weights * phi)) - log_mgf
    gap = lhs - rhs
    return DvReport(lhs=lhs, rhs=rhs, gap=gap, holds=(gap >= -1e-12) or math.isinf(lhs))


@dataclass
class VariationalMeanReport:
    expectation: float
    tilted_bracket: float
    gap: float
    random_min_gap: float
    holds: bool


def variational_mean_check(
    nu: ProbVec, lam: float, n_random: int = 1000, seed: int = 0
) -> VariationalMeanReport:
    """lam * E_nu[X] = inf_mu [KL(nu||mu) + log E_mu[e^(lam X)]], any lam != 0.

    The bracket is minimized by tilting nu with e^(-lam x); random reference
    measures probe the inequality side. The gap fields are in bracket units
    (lam times the mean), so the equality check is scale honest for negative
    lam as well.
    """
    if lam == 0:
        raise InputError("variational_mean_check: lam must be nonzero")
    x = np.asarray([float(v) for v in nu.labels])
    w = nu.weights
    expectation = float(np.sum(w * x))
    target = lam * expectation

    def bracket(mu_w):
        kl = kl_divergence_weights(w, mu_w)
        shift = (lam * x).max()
        log_mgf = shift + math.log(float(np.sum(mu_w * np.exp(lam * x - shift))))
        return kl + log_mgf

    tilt_log = -lam * x
    tilt = w * np.exp(tilt_log - tilt_log.max())
    tilt /= tilt.sum()
    tilted_bracket = bracket(tilt)
    gap = tilted_bracket - target

    rng = np.random.default_rng([seed])
    random_min_gap = math.inf
    for _ in range(n_random):
        mu_w = rng.exponential(size=x.size)
        mu_w /= mu_w.sum()
        random_min_gap = min(random_min_gap, bracket(mu_w) - target)
    scale = max(1.0, abs(target))
    return VariationalMeanReport(
        expectation=expectation,
        tilted_bracket=tilted_bracket,
        gap=gap,
        random_min_gap=random_min_gap,
        holds=abs(gap) <= 1e-12 * scale and random_min_gap >= -1e-12 * scale,
    )


@dataclass
class VariationalTailReport:
    log_tail: float
    restricted_objective: float
    grid_max: float
    holds: bool
    degenerate: bool = False


def variational_tail_check(
    mu: ProbVec, threshold: float, epsilon: float = 0.0, grid_resolution: float = 0.05
) -> VariationalTailReport:
    """log P(X >= t) as a restricted-support variational problem.

    The optimizer is mu renormalized on [t, inf): its objective -KL equals
    the log tail exactly (the inner linear penalty vanishes because every
    support point clears the threshold, whatever the slack). A simplex grid
    over feasible restricted distributions must never exceed it.
    """
    x = np.asarray([float(v) for v in mu.labels])
    tail_mass = float(mu.weights[x >= threshold].sum())
    if tail_mass <= 0.0:
        return VariationalTailReport(
            log_tail=-math.inf,
            restricted_objective=-math.inf,
            grid_max=-math.inf,
            holds=True,
            degenerate=True,
        )
    log_tail = math.log(tail_mass)

    sel = x >= threshold
    nu_star = np.zeros_like(mu.weights)
    nu_star[sel] = mu.weights[sel] / tail_mass
    restricted_objective = -kl_divergence_weights(nu_star, mu.weights)

    idx = np.nonzero(sel)[0]
    grid_max = -math.inf
    if idx.size == 1:
        grid_max = restricted_objective
    else:
        for row in simplex_rows(idx.size, grid_resolution):
            nu = np.zeros_like(mu.weights)
            nu[idx] = row
            grid_max = max(grid_max, -kl_divergence_weights(nu, mu.weights))
    holds = (
        abs(restricted_objective - log_tail) <= 1e-12
        and grid_max <= log_tail + 1e-9
    )
    return VariationalTailReport(
        log_tail=log_tail,
        restricted_objective=restricted_objective,
        grid_max=grid_max,
        holds=holds,
    )

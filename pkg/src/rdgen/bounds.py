"""Generalization-bound evaluators.

Every public function returns a BoundReport: the bound value, the inputs, and
each intermediate quantity (rate terms, optimal distortion slack, root-solve
residuals) so a report can be audited without re-running the computation.

Conventions: rates in nats, bounds in loss units. Bounded-loss evaluators
(CMI, VC) use the bounded-loss constants directly, with the subgaussian
factor absorbed into the displayed formulas; formula evaluators take an
explicit sigma.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError, InputError, SizeError
from .harness import (
    FiniteProblem,
    enumerate_joint,
    gen_table,
    kernel_matrix,
    per_sample_joint,
    single_sample_gen_table,
    SUBGAUSSIAN_SIGMA_BOUNDED,
)
from .infocore import ProbVec, binary_entropy, mutual_information
from .rd_solver import (
    DistortionMatrix,
    MartonSupResult,
    closed_form_rd,
    envelope_rate_at,
    marton_sup,
    rd_at_distortion,
    sweep_envelope,
)

LOG2 = math.log(2.0)


@dataclass
class BoundInput:
    """Scalar knobs shared by the bound formulas."""

    sigma: float
    n: int
    delta: float = 1.0
    epsilon: float = 0.0
    rate: float = None

    def __post_init__(self):
        if self.sigma < 0:
            raise InputError("BoundInput: sigma must be >= 0")
        if self.n < 1:
            raise InputError("BoundInput: n must be >= 1")
        if not 0.0 < self.delta <= 1.0:
            raise InputError("BoundInput: delta must lie in (0, 1]")


@dataclass
class BoundReport:
    kind: str
    value: float
    inputs: dict
    intermediates: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise InputError("BoundReport: value must be finite")

    def to_json_dict(self):
        def clean(obj):
            if isinstance(obj, dict):
                return {k: clean(v) for k, v in obj.items()}
            if isinstance(obj, (list, tuple)):
                return [clean(v) for v in obj]
            if isinstance(obj, (np.floating, float)):
                return float(obj)
            if isinstance(obj, (np.integer, int)):
                return int(obj)
            return obj

        return clean(
            {
                "kind": self.kind,
                "value": self.value,
                "inputs": self.inputs,
                "intermediates": self.intermediates,
                "provenance": self.provenance,
            }
        )


def _sqrt_term(sigma, rate, n):
    return math.sqrt(2.0 * sigma * sigma * max(rate, 0.0) / n)


def epsilon_grid(sigma, n, points=200):
    """Log-spaced slack grid spanning [scale/1e3, scale*10], scale = sigma/sqrt(n)."""
    scale = max(sigma, 1e-12) / math.sqrt(n)
    return np.geomspace(scale / 1e3, scale * 10.0, points)


# ---------------------------------------------------------------------------
# rate-in-hand formula bounds
# ---------------------------------------------------------------------------

def expectation_bound(rate: float, inp: BoundInput, absolute: bool = False) -> BoundReport:
    """sqrt(2 sigma^2 R / n) + eps; the |gap| variant adds log 2 to the rate."""
    if rate < 0:
        raise InputError("expectation_bound: rate must be >= 0")
    r_eff = rate + (LOG2 if absolute else 0.0)
    value = _sqrt_term(inp.sigma, r_eff, inp.n) + inp.epsilon
    return BoundReport(
        kind="expectation_rate_abs" if absolute else "expectation_rate",
        value=value,
        inputs={"sigma": inp.sigma, "n": inp.n, "epsilon": inp.epsilon, "rate": rate},
        intermediates={"effective_rate": r_eff, "sqrt_term": value - inp.epsilon},
        provenance={"bound_family": "expectation", "rate_term": "supplied"},
    )


def tail_bound(rate, inp: BoundInput) -> BoundReport:
    """sqrt(2 sigma^2 (R + log(1/delta)) / n) + eps.

    ``rate`` may be a KL-ball supremum result, in which case its method and
    certification are echoed into the report.
    """
    inter = {}
    if isinstance(rate, MartonSupResult):
        inter["rate_method"] = rate.method
        inter["rate_certificate"] = rate.certificate
        inter["rate_candidates"] = rate.n_candidates
        r = rate.rate
    else:
        r = float(rate)
    if r < 0:
        raise InputError("tail_bound: rate must be >= 0")
    if inp.delta >= 1.0:
        log_term = 0.0
    else:
        log_term = math.log(1.0 / inp.delta)
    value = _sqrt_term(inp.sigma, r + log_term, inp.n) + inp.epsilon
    inter.update({"rate": r, "log_one_over_delta": log_term})
    return BoundReport(
        kind="kl_ball_tail",
        value=value,
        inputs={
            "sigma": inp.sigma,
            "n": inp.n,
            "delta": inp.delta,
            "epsilon": inp.epsilon,
        },
        intermediates=inter,
        provenance={"bound_family": "tail", "rate_term": "kl_ball_sup"},
    )


def dimension_bound(dim_r: float, lipschitz: float, inp: BoundInput) -> BoundReport:
    """sqrt(4 sigma^2 dim_R log(n L^2) / n), valid for large n under the
    asserted uniform-convergence hypothesis (recorded, not checked)."""
    if dim_r < 0:
        raise InputError("dimension_bound: dim_r must be >= 0")
    nl2 = inp.n * lipschitz * lipschitz
    if nl2 <= 1.0:
        raise InputError("dimension_bound: n * L^2 must exceed 1")
    value = math.sqrt(4.0 * inp.sigma**2 * dim_r * math.log(nl2) / inp.n)
    return BoundReport(
        kind="rd_dimension",
        value=value,
        inputs={"sigma": inp.sigma, "n": inp.n, "dim_r": dim_r, "lipschitz": lipschitz},
        intermediates={"log_n_l2": math.log(nl2), "assumed_uniform_convergence": True},
        provenance={"bound_family": "expectation", "rate_term": "rd_dimension"},
    )


def vc_bounds(d: int, n: int, delta: float = None, which: str = "expectation") -> BoundReport:
    """Bounded-loss combinatorial-dimension bounds (constants as displayed)."""
    if not 1 <= d <= n:
        raise InputError("vc_bounds: need 1 <= d <= n")
    growth = d * math.log(2.0 * math.e * n / d)
    if which == "expectation":
        value = math.sqrt(2.0 * growth / n)
        inter = {"growth_term": growth}
    elif which == "abs_expectation":
        value = math.sqrt(2.0 * (growth + LOG2) / n)
        inter = {"growth_term": growth}
    elif which == "tail":
        if delta is None or not 0.0 < delta < 1.0:
            raise InputError("vc_bounds: tail variant needs delta in (0, 1)")
        log_term = math.log(2.0 / delta)
        main = math.sqrt(2.0 * (growth + log_term) / n)
        extra = math.sqrt(log_term / n)
        value = main + extra
        inter = {"growth_term": growth, "main_term": main, "ghost_term": extra}
    else:
        raise InputError(f"vc_bounds: unknown variant {which!r}")
    return BoundReport(
        kind=f"vc_{which}",
        value=value,
        inputs={"d": d, "n": n, "delta": delta},
        intermediates=inter,
        provenance={"bound_family": "tail" if which == "tail" else "expectation",
                    "rate_term": "vc_growth"},
    )


# ---------------------------------------------------------------------------
# exact constrained-rate bounds on enumerable problems
# ---------------------------------------------------------------------------

def _exact_rate(problem, epsilon, variant):
    """Constrained rate on the exact joint for one slack level."""
    joint = enumerate_joint(problem)
    probs = problem.dataset_probs()
    kernel = kernel_matrix(problem)
    gaps = gen_table(problem)
    source = ProbVec(joint.row_labels, probs)

    if variant in ("two_sided", "one_sided"):
        dist = DistortionMatrix(joint.row_labels, list(problem.w_labels), gaps)
        t0 = float((probs[:, None] * kernel * gaps).sum())
        if variant == "two_sided":
            constraint = (t0 - epsilon, t0 + epsilon)
        else:
            constraint = (t0 - epsilon, np.inf)
        pt = rd_at_distortion(source, dist, constraint=constraint)
        return pt.rate, {"mean_gap": t0, "achieved": pt.distortion, "slope": pt.slope}
    if variant == "abs":
        dist = DistortionMatrix(joint.row_labels, list(problem.w_labels), np.abs(gaps))
        t0 = float((probs[:, None] * kernel * np.abs(gaps)).sum())
        pt = rd_at_distortion(source, dist, constraint=(t0 - epsilon, np.inf))
        return pt.rate, {"mean_abs_gap": t0, "achieved": pt.distortion, "slope": pt.slope}
    raise InputError(f"_exact_rate: unknown variant {variant!r}")


def _exact_rate_fn(problem, variant):
    """One slope sweep per problem: slack level -> achievable rate closure.

    The two-sided constraint [t0-eps, t0+eps] on the mean gap collapses to
    whichever side of the rate-0 span t0 sits on; a single traced envelope
    then answers every slack level by chord interpolation (a valid upper
    bound on the constrained rate, so downstream bounds stay bounds).
    """
    joint = enumerate_joint(problem)
    probs = problem.dataset_probs()
    kernel = kernel_matrix(problem)
    gaps = gen_table(problem)
    if variant == "abs":
        g = np.abs(gaps)
        t0 = float((probs[:, None] * kernel * np.abs(gaps)).sum())
        one_sided = True
    elif variant in ("two_sided", "one_sided"):
        g = gaps
        t0 = float((probs[:, None] * kernel * gaps).sum())
        one_sided = variant == "one_sided"
    else:
        raise InputError(f"_exact_rate_fn: unknown variant {variant!r}")
    source = ProbVec(joint.row_labels, probs)
    col_means = probs @ g
    col_lo, col_hi = float(col_means.min()), float(col_means.max())

    if col_lo - 1e-15 <= t0 <= col_hi + 1e-15:
        # a constant hypothesis can match the mean gap: rate 0 at every slack
        return lambda eps: 0.0
    if t0 < col_lo:
        if one_sided:
            # only "not too small" is required and constants already overshoot
            return lambda eps: 0.0
        # the interval's upper edge binds: E[g] <= t0 + eps
        dist = DistortionMatrix(joint.row_labels, list(problem.w_labels), g)
        ds, rs = sweep_envelope(source, dist)
        return lambda eps: envelope_rate_at(ds, rs, t0 + eps)
    # t0 > col_hi: the lower edge binds (the kernel tracks the data better
    # than any constant hypothesis): E[g] >= t0 - eps, i.e. E[-g] <= eps - t0
    dist = DistortionMatrix(joint.row_labels, list(problem.w_labels), -g)
    ds, rs = sweep_envelope(source, dist)
    return lambda eps: envelope_rate_at(ds, rs, eps - t0)


def exact_expectation_bound(
    problem: FiniteProblem,
    epsilon: float = 0.0,
    variant: str = "two_sided",
    eps_strategy: str = "fixed",
    sigma: float = None,
) -> BoundReport:
    """Expectation bound with the rate solved exactly on the enumerated joint.

    variants: two_sided (|gap difference| <= eps, bounds |E[gap]|), one_sided
    (bounds E[gap]), abs (|gap| distortion, bounds E[|gap|], adds log 2 under
    the radical), per_sample (one single-coordinate problem per sample, the
    sqrt terms averaged outside the radical).
    """
    problem.check_exact_mode()
    sigma = SUBGAUSSIAN_SIGMA_BOUNDED if sigma is None else sigma
    n = problem.n

    def value_at(eps):
        if variant == "per_sample":
            rates = []
            gaps1 = single_sample_gen_table(problem)
            for i in range(n):
                joint_i = per_sample_joint(problem, i)
                t0 = float((joint_i * gaps1).sum())
                src = ProbVec(list(problem.z_labels), joint_i.sum(axis=1))
                dist = DistortionMatrix(
                    list(problem.z_labels), list(problem.w_labels), gaps1
                )
                pt = rd_at_distortion(src, dist, constraint=(t0 - eps, t0 + eps))
                rates.append(pt.rate)
            val = sum(math.sqrt(2.0 * sigma * sigma * r) for r in rates) / n + eps
            return val, {"per_sample_rates": rates}
        rate, inter = _exact_rate(problem, eps, variant)
        extra = LOG2 if variant == "abs" else 0.0
        val = _sqrt_term(sigma, rate + extra, n) + eps
        inter["rate"] = rate
        return val, inter

    if eps_strategy == "fixed":
        value, inter = value_at(float(epsilon))
        inter["epsilon"] = float(epsilon)
    elif eps_strategy == "grid":
        if variant == "per_sample":
            raise InputError("exact_expectation_bound: grid strategy not offered per sample")
        rate_at = _exact_rate_fn(problem, variant)
        extra = LOG2 if variant == "abs" else 0.0
        best = (math.inf, None, None)
        for eps in epsilon_grid(sigma, n):
            rate = rate_at(float(eps))
            val = _sqrt_term(sigma, rate + extra, n) + float(eps)
            if val < best[0]:
                best = (val, float(eps), rate)
        value, eps_star, rate_star = best
        inter = {"epsilon": eps_star, "rate": rate_star, "eps_strategy": "grid"}
    else:
        raise InputError(f"exact_expectation_bound: unknown eps_strategy {eps_strategy!r}")

    return BoundReport(
        kind=f"exact_expectation_{variant}",
        value=value,
        inputs={"sigma": sigma, "n": n, "variant": variant},
        intermediates=inter,
        provenance={"bound_family": "expectation", "rate_term": "exact_constrained"},
    )


def lossless_mi_bound(problem: FiniteProblem, sigma: float = None) -> BoundReport:
    """sqrt(2 sigma^2 I(S;W) / n) from the exact joint."""
    problem.check_exact_mode()
    sigma = SUBGAUSSIAN_SIGMA_BOUNDED if sigma is None else sigma
    mi = mutual_information(enumerate_joint(problem))
    value = _sqrt_term(sigma, mi, problem.n)
    return BoundReport(
        kind="lossless_mutual_information",
        value=value,
        inputs={"sigma": sigma, "n": problem.n},
        intermediates={"mi_sw": mi},
        provenance={"bound_family": "expectation", "rate_term": "mutual_information"},
    )


def tail_bound_for_problem(
    problem: FiniteProblem,
    epsilon: float,
    delta: float,
    grid_step: float = 0.01,
    sigma: float = None,
) -> BoundReport:
    """Tail bound with the KL-ball supremum computed by the dense grid."""
    sigma = SUBGAUSSIAN_SIGMA_BOUNDED if sigma is None else sigma
    joint = enumerate_joint(problem)
    gaps = gen_table(problem)
    dist = DistortionMatrix(joint.row_labels, list(problem.w_labels), gaps)
    sup = marton_sup(joint, dist, epsilon=epsilon, delta=delta, grid_step=grid_step)
    inp = BoundInput(sigma=sigma, n=problem.n, delta=delta, epsilon=epsilon)
    report = tail_bound(sup, inp)
    return report


# ---------------------------------------------------------------------------
# Lipschitz-loss rate-distortion bounds
# ---------------------------------------------------------------------------

def lipschitz_expectation_bound(
    source,
    dist,
    lipschitz: float,
    inp: BoundInput,
    eps_grid=None,
) -> BoundReport:
    """sqrt(2 sigma^2 RD(eps / (2 L)) / n) + eps for a known hypothesis marginal.

    ``source``/``dist`` are either a ProbVec and a DistortionMatrix (finite
    solve) or a family name and its parameter dict (closed form). Passing
    ``eps_grid`` minimizes the bound over the grid, smallest slack wins ties.
    """
    if lipschitz <= 0:
        raise InputError("lipschitz_expectation_bound: lipschitz must be > 0")

    if isinstance(source, str):
        def rate_at(eps):
            return closed_form_rd(source, dist, eps / (2.0 * lipschitz))
    else:
        def rate_at(eps):
            return rd_at_distortion(source, dist, eps / (2.0 * lipschitz)).rate

    def value_at(eps):
        if eps < 0:
            raise InputError("lipschitz_expectation_bound: epsilon must be >= 0")
        r = rate_at(eps)
        return _sqrt_term(inp.sigma, r, inp.n) + eps, r

    if eps_grid is None:
        value, rate = value_at(inp.epsilon)
        chosen = inp.epsilon
    else:
        best = (math.inf, None, None)
        for eps in eps_grid:
            val, r = value_at(float(eps))
            if val < best[0]:
                best = (val, float(eps), r)
        value, chosen, rate = best

    return BoundReport(
        kind="lipschitz_rd",
        value=value,
        inputs={"sigma": inp.sigma, "n": inp.n, "lipschitz": lipschitz},
        intermediates={"epsilon": chosen, "rate": rate, "rd_argument": chosen / (2 * lipschitz)},
        provenance={"bound_family": "expectation", "rate_term": "rate_distortion"},
    )


def gaussian_mean_example_bound(
    d: int,
    sigma0_sq: float,
    lipschitz: float,
    n: int,
    sigma: float,
    epsilon: float = None,
    eps_grid=None,
) -> BoundReport:
    """Averaging d i.i.d. normal coordinates: hypothesis variance sigma0^2/n.

    The slack defaulting to 2 L d sigma0^2 / n zeroes the log and makes the
    bound equal the slack itself.
    """
    if epsilon is None and eps_grid is None:
        epsilon = 2.0 * lipschitz * d * sigma0_sq / n
    inp = BoundInput(sigma=sigma, n=n, epsilon=epsilon if epsilon is not None else 0.0)
    report = lipschitz_expectation_bound(
        "gaussian_sq",
        {"d": d, "sigma2": sigma0_sq / n},
        lipschitz,
        inp,
        eps_grid=eps_grid,
    )
    report.kind = "gaussian_mean_example"
    report.inputs.update({"d": d, "sigma0_sq": sigma0_sq})
    return report


# ---------------------------------------------------------------------------
# supersample (selector-bit) bounds
# ---------------------------------------------------------------------------

CMI_MAX_N_FULL = 12


@dataclass
class SupersampleContext:
    """One fixed super-dataset of n (left, right) sample pairs.

    ``kernels`` is a list of (weight, kernel_fn) pairs covering the finite
    auxiliary randomness; kernel_fn maps a dataset tuple to hypothesis
    weights. Losses must lie in [0, 1].
    """

    supersample: list
    w_labels: list
    loss_of: dict  # z label -> np.ndarray over w_labels
    kernels: list

    def __post_init__(self):
        for z, arr in self.loss_of.items():
            arr = np.asarray(arr, dtype=np.float64)
            if np.any(arr < 0) or np.any(arr > 1):
                raise InputError("SupersampleContext: losses must lie in [0, 1]")
            self.loss_of[z] = arr
        w = np.array([float(k[0]) for k in self.kernels])
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InputError("SupersampleContext: kernel weights must be a distribution")

    @property
    def n(self):
        return len(self.supersample)


def supersample_context(problem: FiniteProblem, supersample) -> SupersampleContext:
    """Build a context from a problem and an explicit n x 2 supersample."""
    loss_of = {
        z: problem.loss[i] for i, z in enumerate(problem.z_labels)
    }
    ds_index = {ds: i for i, ds in enumerate(problem.datasets())}

    def make_kernel(spec):
        rows = kernel_matrix(problem, spec)

        def kernel_fn(dataset):
            return rows[ds_index[dataset]]

        return kernel_fn

    if problem.algorithm.kind == "mixture":
        kernels = [
            (w, make_kernel(sub)) for w, sub in problem.algorithm.components
        ]
    else:
        kernels = [(1.0, make_kernel(problem.algorithm))]
    return SupersampleContext(
        supersample=[tuple(pair) for pair in supersample],
        w_labels=list(problem.w_labels),
        loss_of=loss_of,
        kernels=kernels,
    )


def _selector_tables(ctx: SupersampleContext):
    """Enumerate selector vectors: datasets, switch values, probabilities."""
    n = ctx.n
    n_w = len(ctx.w_labels)
    selectors = list(itertools.product((1, 2), repeat=n))
    datasets = []
    f_vals = np.zeros((len(selectors), n_w))
    for r, k in enumerate(selectors):
        ds = tuple(
            ctx.supersample[j][0] if k[j] == 1 else ctx.supersample[j][1]
            for j in range(n)
        )
        datasets.append(ds)
        acc = np.zeros(n_w)
        for j in range(n):
            z1, z2 = ctx.supersample[j]
            sign = -1.0 if k[j] == 1 else 1.0
            acc += sign * (ctx.loss_of[z1] - ctx.loss_of[z2])
        f_vals[r] = acc / n
    return selectors, datasets, f_vals


def _grouped_interval_rate(weights, group_keys, dist_vals, t0, epsilon):
    """Min I(source; What) with rows grouped by equal keys (shared kernel rows)."""
    order = {}
    for w_, key, row in zip(weights, group_keys, dist_vals):
        if key not in order:
            order[key] = [0.0, np.zeros(dist_vals.shape[1])]
        order[key][0] += w_
        order[key][1] += w_ * row
    labels = list(order.keys())
    probs = np.array([order[k][0] for k in labels])
    rows = np.stack([order[k][1] / order[k][0] for k in labels])
    src = ProbVec(list(range(len(labels))), probs)
    dist = DistortionMatrix(list(range(len(labels))), list(range(rows.shape[1])), rows)
    pt = rd_at_distortion(src, dist, constraint=(t0 - epsilon, t0 + epsilon))
    return pt.rate


def cmi_bound(ctx: SupersampleContext, epsilon: float, mode: str = "full_K") -> BoundReport:
    """Selector-bit bound for one supersample context (bounded losses).

    full_K: one rate problem with the selector vector as source, value
    sqrt(2 R / n) + eps. per_coordinate: n binary-source problems, value
    (1/n) sum sqrt(2 R_i) + eps.
    """
    n = ctx.n
    if mode == "full_K" and n > CMI_MAX_N_FULL:
        raise SizeError(f"cmi_bound: full_K limited to n <= {CMI_MAX_N_FULL}")
    selectors, datasets, f_vals = _selector_tables(ctx)
    k_prob = 1.0 / len(selectors)

    total = 0.0
    per_u = []
    for weight, kernel_fn in ctx.kernels:
        w_rows = np.stack([kernel_fn(ds) for ds in datasets])  # [2^n, |W|]
        t0 = float(k_prob * (w_rows * f_vals).sum())
        if mode == "full_K":
            rate = _grouped_interval_rate(
                np.full(len(selectors), k_prob), datasets, f_vals, t0, epsilon
            )
            val = math.sqrt(2.0 * rate / n) + epsilon
            per_u.append({"rate": rate, "mean_switch_gap": t0})
        elif mode == "per_coordinate":
            rates = []
            for j in range(n):
                z1, z2 = ctx.supersample[j]
                base = ctx.loss_of[z1] - ctx.loss_of[z2]
                # mean of f_j(K_j, W) over the full selector/hypothesis joint
                signs = np.array([-1.0 if k[j] == 1 else 1.0 for k in selectors])
                t0_j = float(k_prob * (signs[:, None] * base[None, :] * w_rows).sum())
                f_j = np.stack([-base, base])  # rows: K_j = 1, K_j = 2
                keys = [z1, z2]
                rates.append(
                    _grouped_interval_rate(
                        np.array([0.5, 0.5]), keys, f_j, t0_j, epsilon
                    )
                )
            val = sum(math.sqrt(2.0 * r) for r in rates) / n + epsilon
            per_u.append({"rates": rates})
        else:
            raise InputError(f"cmi_bound: unknown mode {mode!r}")
        total += weight * val

    return BoundReport(
        kind=f"cmi_{mode}",
        value=total,
        inputs={"n": n, "epsilon": epsilon, "mode": mode},
        intermediates={"per_auxiliary": per_u},
        provenance={"bound_family": "expectation", "rate_term": "selector_rate"},
    )


def cmi_bound_for_problem(
    problem: FiniteProblem, epsilon: float = 0.0, mode: str = "full_K"
) -> BoundReport:
    """Average the per-supersample bound over the exact supersample law."""
    n = problem.n
    n_z = len(problem.z_labels)
    if n_z ** (2 * n) > 65536:
        raise SizeError("cmi_bound_for_problem: supersample enumeration too large")
    mu = problem.mu.weights
    total = 0.0
    count = 0
    for flat in itertools.product(range(n_z), repeat=2 * n):
        prob = float(np.prod(mu[list(flat)]))
        if prob <= 0.0:
            continue
        pairs = [
            (problem.z_labels[flat[2 * j]], problem.z_labels[flat[2 * j + 1]])
            for j in range(n)
        ]
        ctx = supersample_context(problem, pairs)
        rep = cmi_bound(ctx, epsilon, mode=mode)
        total += prob * rep.value
        count += 1
    return BoundReport(
        kind=f"cmi_{mode}",
        value=total,
        inputs={"n": n, "epsilon": epsilon, "mode": mode},
        intermediates={"supersamples": count},
        provenance={"bound_family": "expectation", "rate_term": "selector_rate"},
    )


# ---------------------------------------------------------------------------
# analytic example bounds
# ---------------------------------------------------------------------------

def _bracketed_root(g, lo, hi_start, max_doublings=80):
    hi = hi_start
    for _ in range(max_doublings):
        if g(hi) >= 0.0:
            return brentq(g, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)
        hi *= 2.0
    raise ConvergenceError(
        f"analytic_example_bound: no root bracket in [{lo}, {hi}]"
    )


def analytic_example_bound(
    kind: str,
    params: dict,
    delta: float,
    eps_strategy="fixed",
    epsilon: float = None,
    alt_normalization: bool = False,
) -> BoundReport:
    """Tail bounds for the four closed-form hypothesis families.

    eps_net: ball-supported hypotheses under a norm-Lipschitz loss.
    hamming: i.i.d. fair bits under a Hamming-Lipschitz loss.
    laplace: i.i.d. two-sided exponential coordinates, L1-Lipschitz loss;
        the rate is pinned by a scalar root equation (residual reported).
    gauss: i.i.d. normal coordinates, squared-L2-Lipschitz loss; same
        root-equation structure. ``alt_normalization`` switches the slack
        from a per-vector to a per-coordinate budget inside the log.
    """
    if not 0.0 < delta <= 1.0:
        raise InputError("analytic_example_bound: delta must lie in (0, 1]")
    sigma = float(params.get("sigma", 1.0))
    n = int(params["n"])
    lip = float(params.get("lipschitz", 1.0))
    d = int(params.get("d", 1))
    log_delta = 0.0 if delta >= 1.0 else math.log(1.0 / delta)
    inter = {}

    if kind == "eps_net":
        r0 = float(params["r0"])
        if r0 <= 0:
            raise InputError("analytic_example_bound: eps_net needs r0 > 0")

        def value_at(eps):
            if not 0 < eps:
                raise InputError("eps_net: epsilon must be > 0")
            rate = d * math.log(2.0 * r0 / eps) if eps < 2.0 * r0 else 0.0
            return _sqrt_term(sigma, rate + log_delta, n) + 2 * lip * eps, rate

        # closed-form corollary value, valid for n >= 16 at delta = e^{-d/2}
        if n >= 16:
            inter["closed_form_value"] = (4 * r0 * lip + sigma * math.sqrt(d)) * math.sqrt(
                math.log(n) / n
            )
            inter["closed_form_delta"] = math.exp(-d / 2.0)
    elif kind == "hamming":
        def value_at(eps):
            if not 0 <= eps <= d:
                raise InputError("hamming: epsilon must lie in [0, d]")
            rate = d * LOG2 - d * binary_entropy(eps / d)
            if eps == d:
                inter["degenerate_corner"] = True
            return _sqrt_term(sigma, rate + log_delta, n) + 2 * lip * eps, rate
    elif kind == "laplace":
        lam = float(params["lam"])
        if lam <= 0:
            raise InputError("laplace: lam must be > 0")
        if delta >= 1.0:
            x_star = 1.0
        else:
            x_star = _bracketed_root(lambda x: (x - 1.0 - math.log(x)) - log_delta, 1.0, 2.0)
        alpha = x_star / lam
        inter["alpha"] = alpha
        inter["root_residual"] = abs((x_star - 1.0 - math.log(x_star)) - log_delta)

        def value_at(eps):
            if eps <= 0:
                raise InputError("laplace: epsilon must be > 0")
            r_prime = math.log(alpha * d / eps)
            rate = d * max(r_prime, 0.0)
            if r_prime < 0:
                inter["rate_clamped"] = True
            return _sqrt_term(sigma, rate + log_delta, n) + 2 * lip * eps, rate
    elif kind == "gauss":
        sigma_n = float(params["sigma_n"])
        if sigma_n <= 0:
            raise InputError("gauss: sigma_n must be > 0")
        if delta >= 1.0:
            y_star = 1.0
        else:
            y_star = _bracketed_root(
                lambda y: 0.5 * (y - 1.0 - math.log(y)) - log_delta, 1.0, 2.0
            )
        alpha = sigma_n * math.sqrt(y_star)
        inter["alpha"] = alpha
        inter["root_residual"] = abs(0.5 * (y_star - 1.0 - math.log(y_star)) - log_delta)
        inter["alt_normalization"] = alt_normalization

        def value_at(eps):
            if eps <= 0:
                raise InputError("gauss: epsilon must be > 0")
            arg = (alpha * alpha / eps) if alt_normalization else (d * alpha * alpha / eps)
            rate = d * math.log(max(arg, 1.0))
            value = math.sqrt(sigma**2 * (rate + 2.0 * log_delta) / n) + 2 * lip * eps
            return value, rate
    else:
        raise InputError(f"analytic_example_bound: unknown kind {kind!r}")

    if eps_strategy == "fixed":
        if epsilon is None:
            raise InputError("analytic_example_bound: fixed strategy needs epsilon")
        value, rate = value_at(float(epsilon))
        inter.update({"epsilon": float(epsilon), "rate_term": rate})
    elif eps_strategy == "grid":
        hi_cap = {"hamming": d}.get(kind, None)
        grid = epsilon_grid(sigma, n)
        if kind == "eps_net":
            grid = grid[grid < 2.0 * float(params["r0"])]
        if hi_cap is not None:
            grid = grid[grid <= hi_cap]
        best = (math.inf, None, None)
        for eps in grid:
            val, rate = value_at(float(eps))
            if val < best[0]:
                best = (val, float(eps), rate)
        value, eps_star, rate = best
        inter.update({"epsilon": eps_star, "rate_term": rate, "eps_strategy": "grid"})
    else:
        raise InputError(f"analytic_example_bound: unknown eps_strategy {eps_strategy!r}")

    return BoundReport(
        kind=f"example_{kind}",
        value=value,
        inputs={"delta": delta, "params": {k: v for k, v in params.items()}},
        intermediates=inter,
        provenance={"bound_family": "tail", "rate_term": f"closed_form_{kind}"},
    )

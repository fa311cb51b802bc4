"""Exact enumeration and Monte Carlo evaluation of finite learning problems.

A FiniteProblem is small enough to enumerate: datasets are the full product
of the data alphabet, the algorithm kernel is an explicit row per dataset,
and every expectation (generalization gap, mutual information, per-sample
marginals) is computed exactly. Losses are required to sit in [0, 1], which
pins the subgaussian scale at 1/2 per sample.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, SizeError
from .infocore import JointTable, ProbVec, mutual_information

EXACT_MODE_CELLS = 10**6  # |Z|^n * |W| cap for exact enumeration

SUBGAUSSIAN_SIGMA_BOUNDED = 0.5  # losses in [0,1] are 1/2-subgaussian


@dataclass
class AlgorithmSpec:
    """How the learner maps a dataset to a hypothesis distribution.

    kinds:
      erm      deterministic empirical-risk minimizer, lowest index wins ties
      gibbs    softmax of -beta * empirical risk
      table    explicit kernel rows over lexicographically enumerated datasets
      mixture  finite auxiliary randomness: weighted list of sub-specs
    """

    kind: str
    beta: float = None
    table: np.ndarray = None
    components: list = None  # [(weight, AlgorithmSpec), ...]

    def __post_init__(self):
        if self.kind not in ("erm", "gibbs", "table", "mixture"):
            raise InputError(f"AlgorithmSpec: unknown kind {self.kind!r}")
        if self.kind == "gibbs" and (self.beta is None or self.beta < 0):
            raise InputError("AlgorithmSpec: gibbs needs beta >= 0")
        if self.kind == "table" and self.table is None:
            raise InputError("AlgorithmSpec: table kind needs rows")
        if self.kind == "mixture":
            if not self.components:
                raise InputError("AlgorithmSpec: mixture needs components")
            w = np.array([float(c[0]) for c in self.components])
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
                raise InputError("AlgorithmSpec: mixture weights must be a distribution")

    @classmethod
    def from_json_dict(cls, obj):
        kind = obj.get("kind")
        if kind == "erm":
            return cls("erm")
        if kind == "gibbs":
            return cls("gibbs", beta=float(obj["beta"]))
        if kind == "table":
            return cls("table", table=np.asarray(obj["rows"], dtype=np.float64))
        if kind == "mixture":
            comps = [
                (float(c["weight"]), cls.from_json_dict(c["algorithm"]))
                for c in obj["components"]
            ]
            return cls("mixture", components=comps)
        raise InputError(f"AlgorithmSpec: unknown kind {kind!r}")

    def to_json_dict(self):
        if self.kind == "erm":
            return {"kind": "erm"}
        if self.kind == "gibbs":
            return {"kind": "gibbs", "beta": float(self.beta)}
        if self.kind == "table":
            return {"kind": "table", "rows": [[float(x) for x in r] for r in self.table]}
        return {
            "kind": "mixture",
            "components": [
                {"weight": float(w), "algorithm": a.to_json_dict()}
                for w, a in self.components
            ],
        }


@dataclass
class FiniteProblem:
    """Fully enumerable learning problem on labeled finite alphabets."""

    z_labels: list
    mu: ProbVec
    w_labels: list
    loss: np.ndarray  # [|Z|, |W|] in [0, 1]
    n: int
    algorithm: AlgorithmSpec
    name: str = ""

    def __post_init__(self):
        loss = np.asarray(self.loss, dtype=np.float64)
        if loss.shape != (len(self.z_labels), len(self.w_labels)):
            raise InputError("FiniteProblem: loss shape must be [|Z|, |W|]")
        if np.any(loss < 0) or np.any(loss > 1):
            raise InputError("FiniteProblem: loss entries must lie in [0, 1]")
        self.loss = loss
        if self.mu.labels != list(self.z_labels):
            raise InputError("FiniteProblem: mu labels must match z_labels")
        if self.n < 1:
            raise InputError("FiniteProblem: n must be >= 1")

    @property
    def n_datasets(self):
        return len(self.z_labels) ** self.n

    def check_exact_mode(self):
        if self.n_datasets * len(self.w_labels) > EXACT_MODE_CELLS:
            raise SizeError(
                f"FiniteProblem: |Z|^n * |W| = {self.n_datasets * len(self.w_labels)} "
                f"exceeds exact-mode cap {EXACT_MODE_CELLS}"
            )

    def datasets(self):
        """Lexicographic enumeration of Z^n as label tuples."""
        return list(itertools.product(self.z_labels, repeat=self.n))

    def dataset_probs(self):
        mu = self.mu.weights
        probs = np.ones(1)
        for _ in range(self.n):
            probs = np.outer(probs, mu).ravel()
        return probs

    def empirical_risks(self):
        """[n_datasets, |W|] mean loss per dataset and hypothesis."""
        z_index = {z: i for i, z in enumerate(self.z_labels)}
        risks = np.zeros((self.n_datasets, len(self.w_labels)))
        for row, ds in enumerate(self.datasets()):
            idx = [z_index[z] for z in ds]
            risks[row] = self.loss[idx].mean(axis=0)
        return risks

    def population_risks(self):
        return self.mu.weights @ self.loss

    def to_json_dict(self):
        return {
            "z": list(self.z_labels),
            "mu": [float(x) for x in self.mu.weights],
            "w": list(self.w_labels),
            "loss": [[float(x) for x in row] for row in self.loss],
            "n": int(self.n),
            "algorithm": self.algorithm.to_json_dict(),
            "name": self.name,
        }

    @classmethod
    def from_json_dict(cls, obj):
        for key in ("z", "mu", "w", "loss", "n", "algorithm"):
            if key not in obj:
                raise InputError(f"FiniteProblem JSON missing key {key!r}")
        return cls(
            z_labels=list(obj["z"]),
            mu=ProbVec(list(obj["z"]), obj["mu"]),
            w_labels=list(obj["w"]),
            loss=np.asarray(obj["loss"], dtype=np.float64),
            n=int(obj["n"]),
            algorithm=AlgorithmSpec.from_json_dict(obj["algorithm"]),
            name=obj.get("name", ""),
        )


def kernel_matrix(problem: FiniteProblem, spec: AlgorithmSpec = None) -> np.ndarray:
    """Resolve the algorithm into explicit kernel rows over datasets."""
    spec = problem.algorithm if spec is None else spec
    n_ds, n_w = problem.n_datasets, len(problem.w_labels)
    if spec.kind == "table":
        rows = np.asarray(spec.table, dtype=np.float64)
        if rows.shape != (n_ds, n_w):
            raise InputError("kernel_matrix: table shape must be [n_datasets, |W|]")
        if np.any(rows < 0) or np.any(np.abs(rows.sum(axis=1) - 1.0) > 1e-12):
            raise InputError("kernel_matrix: table rows must be distributions")
        return rows
    if spec.kind == "mixture":
        out = np.zeros((n_ds, n_w))
        for w, sub in spec.components:
            out += w * kernel_matrix(problem, sub)
        return out
    risks = problem.empirical_risks()
    if spec.kind == "erm":
        rows = np.zeros_like(risks)
        rows[np.arange(n_ds), risks.argmin(axis=1)] = 1.0  # lowest index wins ties
        return rows
    # gibbs posterior
    logits = -spec.beta * risks
    logits -= logits.max(axis=1, keepdims=True)
    rows = np.exp(logits)
    rows /= rows.sum(axis=1, keepdims=True)
    return rows


def enumerate_joint(problem: FiniteProblem) -> JointTable:
    """Exact joint of (dataset, hypothesis) by full enumeration of Z^n."""
    problem.check_exact_mode()
    probs = problem.dataset_probs()
    kernel = kernel_matrix(problem)
    cells = probs[:, None] * kernel
    return JointTable(problem.datasets(), list(problem.w_labels), cells)


def gen_table(problem: FiniteProblem) -> np.ndarray:
    """gap(s, w) = population risk - empirical risk, for every dataset row."""
    return problem.population_risks()[None, :] - problem.empirical_risks()


def single_sample_gen_table(problem: FiniteProblem) -> np.ndarray:
    """gap({z}, w) for single data points: population risk minus one loss."""
    return problem.population_risks()[None, :] - problem.loss


def per_sample_joint(problem: FiniteProblem, i: int) -> np.ndarray:
    """Exact joint of (Z_i, W) as a [|Z|, |W|] table."""
    if not 0 <= i < problem.n:
        raise InputError("per_sample_joint: coordinate out of range")
    probs = problem.dataset_probs()
    kernel = kernel_matrix(problem)
    z_index = {z: k for k, z in enumerate(problem.z_labels)}
    out = np.zeros((len(problem.z_labels), len(problem.w_labels)))
    for row, ds in enumerate(problem.datasets()):
        out[z_index[ds[i]]] += probs[row] * kernel[row]
    return out


@dataclass
class GenStats:
    """Exact generalization-gap statistics of a finite problem."""

    exact_mean_gen: float
    exact_mean_abs_gen: float
    mi_sw: float
    gen_distribution: list  # [(value, probability)] sorted by value
    subgaussian_sigma: float

    def __post_init__(self):
        total = sum(p for _, p in self.gen_distribution)
        if abs(total - 1.0) > 1e-9:
            raise InputError("GenStats: gen_distribution must sum to 1")
        if abs(self.exact_mean_gen) > self.exact_mean_abs_gen + 1e-12:
            raise InputError("GenStats: |mean| cannot exceed mean absolute value")


def exact_gen_stats(problem: FiniteProblem) -> GenStats:
    problem.check_exact_mode()
    probs = problem.dataset_probs()
    kernel = kernel_matrix(problem)
    gaps = gen_table(problem)
    joint = probs[:, None] * kernel
    mean_gen = float((joint * gaps).sum())
    mean_abs = float((joint * np.abs(gaps)).sum())
    mi = mutual_information(enumerate_joint(problem))

    dist = {}
    for v, p in zip(gaps.ravel(), joint.ravel()):
        if p <= 0:
            continue
        key = round(float(v), 12)
        dist[key] = dist.get(key, 0.0) + float(p)
    gen_distribution = sorted(dist.items())
    return GenStats(
        exact_mean_gen=mean_gen,
        exact_mean_abs_gen=mean_abs,
        mi_sw=mi,
        gen_distribution=gen_distribution,
        subgaussian_sigma=SUBGAUSSIAN_SIGMA_BOUNDED,
    )


@dataclass
class MonteCarloGen:
    """Sampled generalization gaps with quantiles and standard errors."""

    mean: float
    stderr: float
    quantiles: dict  # CDF level -> empirical quantile (level 1.0 is the max)
    trials: int
    seed: int
    values: np.ndarray = field(repr=False, default=None)

    def quantile_at_delta(self, delta: float) -> float:
        """Upper quantile exceeded with empirical probability <= delta."""
        return float(np.quantile(self.values, 1.0 - delta, method="higher"))


def monte_carlo_gen(
    problem: FiniteProblem, trials: int, seed: int, q_levels=(0.9, 0.95, 0.99, 1.0)
) -> MonteCarloGen:
    """Sample S ~ mu^n, W ~ kernel and return the empirical gap distribution."""
    if trials < 1:
        raise InputError("monte_carlo_gen: trials must be >= 1")
    rng = np.random.default_rng([seed])
    n_z = len(problem.z_labels)
    z_draws = rng.choice(n_z, size=(trials, problem.n), p=problem.mu.weights)
    powers = n_z ** np.arange(problem.n - 1, -1, -1)
    ds_index = z_draws @ powers  # lexicographic dataset index
    kernel = kernel_matrix(problem)
    cum = np.cumsum(kernel, axis=1)
    u = rng.random(trials)
    w_index = (u[:, None] > cum[ds_index]).sum(axis=1)
    pop = problem.population_risks()
    emp = problem.loss[z_draws, w_index[:, None]].mean(axis=1)
    values = pop[w_index] - emp
    quantiles = {
        float(q): float(np.quantile(values, q, method="higher")) for q in q_levels
    }
    return MonteCarloGen(
        mean=float(values.mean()),
        stderr=float(values.std(ddof=1) / np.sqrt(trials)),
        quantiles=quantiles,
        trials=trials,
        seed=seed,
        values=values,
    )


@dataclass
class CompareRow:
    kind: str
    bound: float
    truth: float
    slack: float
    ok: bool
    detail: dict


@dataclass
class CompareReport:
    """Bound-vs-truth table for one problem; CRITICAL when truth beats a bound."""

    problem_name: str
    rows: list
    critical: bool

    def to_json_dict(self):
        return {
            "problem": self.problem_name,
            "critical": self.critical,
            "rows": [
                {
                    "kind": r.kind,
                    "bound": float(r.bound),
                    "truth": float(r.truth),
                    "slack": float(r.slack),
                    "ok": bool(r.ok),
                    "detail": r.detail,
                }
                for r in self.rows
            ],
        }


# Tolerance on the exact side of a dominance comparison.
DOMINANCE_TOL = 1e-9

DEFAULT_COMPARE_KINDS = (
    "lossless_mi",
    "exact_two_sided",
    "per_sample",
    "cmi_full",
    "tail_kl_ball",
)


def compare_report(
    problem: FiniteProblem,
    kinds=DEFAULT_COMPARE_KINDS,
    epsilon: float = 0.0,
    delta: float = 0.1,
    trials: int = 10**5,
    seed: int = 20240,
    grid_step: float = 0.01,
) -> CompareReport:
    """One table: exact/Monte Carlo truth against every requested bound.

    A bound beaten by the exact truth (beyond DOMINANCE_TOL) is a CRITICAL
    finding: the theory guarantees dominance, so a violation is an
    implementation bug, never a property of the problem instance.
    """
    from . import bounds as bd

    stats = exact_gen_stats(problem)
    truth_abs = abs(stats.exact_mean_gen)
    rows = []

    def add(kind, report, truth):
        ok = truth <= report.value + DOMINANCE_TOL
        rows.append(
            CompareRow(
                kind=kind,
                bound=report.value,
                truth=truth,
                slack=report.value - truth,
                ok=ok,
                detail={"intermediates": report.intermediates},
            )
        )

    for kind in kinds:
        if kind == "lossless_mi":
            add(kind, bd.lossless_mi_bound(problem), truth_abs)
        elif kind == "exact_two_sided":
            add(
                kind,
                bd.exact_expectation_bound(
                    problem, epsilon=None, variant="two_sided", eps_strategy="grid"
                ),
                truth_abs,
            )
        elif kind == "exact_one_sided":
            add(
                kind,
                bd.exact_expectation_bound(
                    problem, epsilon=epsilon, variant="one_sided"
                ),
                stats.exact_mean_gen,
            )
        elif kind == "exact_abs":
            add(
                kind,
                bd.exact_expectation_bound(problem, epsilon=epsilon, variant="abs"),
                stats.exact_mean_abs_gen,
            )
        elif kind == "per_sample":
            add(
                kind,
                bd.exact_expectation_bound(
                    problem, epsilon=epsilon, variant="per_sample"
                ),
                truth_abs,
            )
        elif kind == "cmi_full":
            add(kind, bd.cmi_bound_for_problem(problem, epsilon, mode="full_K"), truth_abs)
        elif kind == "cmi_per_coordinate":
            add(
                kind,
                bd.cmi_bound_for_problem(problem, epsilon, mode="per_coordinate"),
                truth_abs,
            )
        elif kind == "tail_kl_ball":
            mc = monte_carlo_gen(problem, trials=trials, seed=seed)
            report = bd.tail_bound_for_problem(
                problem, epsilon=0.0, delta=delta, grid_step=grid_step
            )
            add(kind, report, mc.quantile_at_delta(delta))
        else:
            raise InputError(f"compare_report: unknown bound kind {kind!r}")

    critical = any(not r.ok for r in rows)
    return CompareReport(problem_name=problem.name or "unnamed", rows=rows, critical=critical)

"""Shipped enumerable problem variants.

Sixteen small learning problems exercising both deterministic and smooth
algorithm kernels across dependence regimes: four n=1 problems whose joint
is a 2x2 table (the tail-bound grid oracle runs on these) and twelve n=2
problems. All have binary data, binary hypotheses, and losses in [0, 1].
"""

import numpy as np

from .harness import AlgorithmSpec, FiniteProblem
from .infocore import ProbVec

# Loss tables: rows are data symbols, columns hypotheses.
LOSS_MATCHED = np.array([[0.0, 1.0], [1.0, 0.0]])  # w matches z
LOSS_SKEWED = np.array([[0.1, 0.8], [0.9, 0.3]])
LOSS_NOISY = np.array([[0.2, 0.7], [0.6, 0.1]])


def _problem(name, mu0, loss, n, algorithm):
    return FiniteProblem(
        z_labels=["z0", "z1"],
        mu=ProbVec(["z0", "z1"], [mu0, 1.0 - mu0]),
        w_labels=["w0", "w1"],
        loss=loss,
        n=n,
        algorithm=algorithm,
        name=name,
    )


def build_suite():
    """The 16 shipped variants, in a stable order."""
    gibbs2 = AlgorithmSpec("gibbs", beta=2.0)
    gibbs8 = AlgorithmSpec("gibbs", beta=8.0)
    erm = AlgorithmSpec("erm")
    blind = AlgorithmSpec("table", table=np.array([[0.5, 0.5]] * 2))
    blind4 = AlgorithmSpec("table", table=np.array([[0.5, 0.5]] * 4))
    mixture = AlgorithmSpec(
        "mixture",
        components=[(0.5, AlgorithmSpec("erm")), (0.5, AlgorithmSpec("gibbs", beta=1.0))],
    )

    problems = [
        # n = 1: joints are 2x2 tables
        _problem("p01_erm_fair_matched", 0.5, LOSS_MATCHED, 1, erm),
        _problem("p02_erm_skewmu_matched", 0.7, LOSS_MATCHED, 1, erm),
        _problem("p03_gibbs2_fair_skewed", 0.5, LOSS_SKEWED, 1, gibbs2),
        _problem("p04_blind_fair_noisy", 0.5, LOSS_NOISY, 1, blind),
        # n = 2: joints are 4x2 tables
        _problem("p05_erm_fair_matched", 0.5, LOSS_MATCHED, 2, erm),
        _problem("p06_erm_skewmu_matched", 0.7, LOSS_MATCHED, 2, erm),
        _problem("p07_erm_fair_skewed", 0.5, LOSS_SKEWED, 2, erm),
        _problem("p08_erm_skewmu_noisy", 0.3, LOSS_NOISY, 2, erm),
        _problem("p09_gibbs2_fair_matched", 0.5, LOSS_MATCHED, 2, gibbs2),
        _problem("p10_gibbs2_skewmu_skewed", 0.7, LOSS_SKEWED, 2, gibbs2),
        _problem("p11_gibbs8_fair_matched", 0.5, LOSS_MATCHED, 2, gibbs8),
        _problem("p12_gibbs8_skewmu_noisy", 0.3, LOSS_NOISY, 2, gibbs8),
        _problem("p13_blind_fair_matched", 0.5, LOSS_MATCHED, 2, blind4),
        _problem("p14_blind_skewmu_skewed", 0.7, LOSS_SKEWED, 2, blind4),
        _problem("p15_mixture_fair_matched", 0.5, LOSS_MATCHED, 2, mixture),
        _problem("p16_mixture_skewmu_noisy", 0.3, LOSS_NOISY, 2, mixture),
    ]
    assert len(problems) == 16
    return problems


def two_by_two_suite():
    """The shipped problems whose (dataset, hypothesis) joint is 2x2."""
    return [p for p in build_suite() if p.n == 1]


def get_problem(name: str) -> FiniteProblem:
    for p in build_suite():
        if p.name == name:
            return p
    raise KeyError(f"no shipped problem named {name!r}")

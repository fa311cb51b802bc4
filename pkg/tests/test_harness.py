import itertools
import math

import numpy as np
import pytest

from rdgen import InputError, ProbVec, SizeError
from rdgen.harness import (
    AlgorithmSpec,
    FiniteProblem,
    compare_report,
    enumerate_joint,
    exact_gen_stats,
    gen_table,
    kernel_matrix,
    monte_carlo_gen,
    per_sample_joint,
    single_sample_gen_table,
)
from rdgen.infocore import mutual_information
from rdgen.problems import build_suite, get_problem, two_by_two_suite


def erm_problem(n=2, mu0=0.5):
    return FiniteProblem(
        z_labels=["z0", "z1"],
        mu=ProbVec(["z0", "z1"], [mu0, 1 - mu0]),
        w_labels=["w0", "w1"],
        loss=np.array([[0.0, 1.0], [1.0, 0.0]]),
        n=n,
        algorithm=AlgorithmSpec("erm"),
        name="erm_test",
    )


class TestEnumerateJoint:
    def test_deterministic_n1_permutes_mu(self):
        p = erm_problem(n=1, mu0=0.3)
        joint = enumerate_joint(p)
        # ERM on the matched loss maps z0 -> w0 and z1 -> w1
        assert np.allclose(joint.cells, [[0.3, 0.0], [0.0, 0.7]])

    def test_blind_algorithm_product_joint(self):
        p = FiniteProblem(
            z_labels=["z0", "z1"],
            mu=ProbVec(["z0", "z1"], [0.6, 0.4]),
            w_labels=["w0", "w1"],
            loss=np.array([[0.2, 0.8], [0.7, 0.1]]),
            n=2,
            algorithm=AlgorithmSpec("table", table=np.array([[0.3, 0.7]] * 4)),
        )
        joint = enumerate_joint(p)
        assert mutual_information(joint) == pytest.approx(0.0, abs=1e-12)

    def test_erm_hand_enumeration_n2(self):
        p = erm_problem(n=2, mu0=0.5)
        joint = enumerate_joint(p)
        # four equiprobable datasets; ERM with lowest-index ties:
        # (z0,z0)->w0, (z0,z1)-> tie (risks .5,.5) -> w0, (z1,z0)-> w0 tie, (z1,z1)->w1
        expected = {
            ("z0", "z0"): [0.25, 0.0],
            ("z0", "z1"): [0.25, 0.0],
            ("z1", "z0"): [0.25, 0.0],
            ("z1", "z1"): [0.0, 0.25],
        }
        for row_label, row in zip(joint.row_labels, joint.cells):
            assert np.allclose(row, expected[row_label])

    def test_marginal_matches_mu_power(self):
        for p in build_suite()[:6]:
            joint = enumerate_joint(p)
            marg = joint.cells.sum(axis=1)
            assert np.allclose(marg, p.dataset_probs(), atol=1e-12)

    def test_size_guard(self):
        p = erm_problem(n=2)
        p.n = 25
        with pytest.raises(SizeError):
            enumerate_joint(p)


class TestGenStats:
    def test_constant_loss_zero_gap(self):
        p = FiniteProblem(
            z_labels=["z0", "z1"],
            mu=ProbVec(["z0", "z1"], [0.5, 0.5]),
            w_labels=["w0"],
            loss=np.array([[0.4], [0.4]]),
            n=2,
            algorithm=AlgorithmSpec("table", table=np.array([[1.0]] * 4)),
        )
        stats = exact_gen_stats(p)
        assert stats.exact_mean_gen == 0.0
        assert stats.exact_mean_abs_gen == 0.0

    def test_single_hypothesis_hand_case(self):
        p = FiniteProblem(
            z_labels=["z0", "z1"],
            mu=ProbVec(["z0", "z1"], [0.5, 0.5]),
            w_labels=["w0"],
            loss=np.array([[0.0], [1.0]]),
            n=1,
            algorithm=AlgorithmSpec("table", table=np.array([[1.0], [1.0]])),
        )
        stats = exact_gen_stats(p)
        # population risk 0.5; empirical risk is 0 or 1 with equal probability
        assert stats.exact_mean_gen == pytest.approx(0.0, abs=1e-15)
        assert stats.exact_mean_abs_gen == pytest.approx(0.5, abs=1e-15)
        assert sorted(v for v, _ in stats.gen_distribution) == [-0.5, 0.5]

    def test_per_sample_decomposition(self):
        for p in build_suite():
            stats = exact_gen_stats(p)
            gaps1 = single_sample_gen_table(p)
            per_sample = [
                float((per_sample_joint(p, i) * gaps1).sum()) for i in range(p.n)
            ]
            assert stats.exact_mean_gen == pytest.approx(
                sum(per_sample) / p.n, abs=1e-12
            )

    def test_sigma_fixed_at_half(self):
        assert exact_gen_stats(erm_problem()).subgaussian_sigma == 0.5


class TestKernels:
    def test_erm_tie_break_lowest_index(self):
        p = FiniteProblem(
            z_labels=["z0"],
            mu=ProbVec(["z0"], [1.0]),
            w_labels=["w0", "w1"],
            loss=np.array([[0.5, 0.5]]),
            n=1,
            algorithm=AlgorithmSpec("erm"),
        )
        assert np.allclose(kernel_matrix(p), [[1.0, 0.0]])

    def test_gibbs_rows_normalized_and_smooth(self):
        p = erm_problem()
        p.algorithm = AlgorithmSpec("gibbs", beta=3.0)
        rows = kernel_matrix(p)
        assert np.allclose(rows.sum(axis=1), 1.0)
        assert np.all(rows > 0)

    def test_mixture_kernel_averages(self):
        p = erm_problem()
        mix = AlgorithmSpec(
            "mixture",
            components=[(0.25, AlgorithmSpec("erm")), (0.75, AlgorithmSpec("gibbs", beta=1.0))],
        )
        rows = kernel_matrix(p, mix)
        ref = 0.25 * kernel_matrix(p, AlgorithmSpec("erm")) + 0.75 * kernel_matrix(
            p, AlgorithmSpec("gibbs", beta=1.0)
        )
        assert np.allclose(rows, ref)

    def test_invalid_specs(self):
        with pytest.raises(InputError):
            AlgorithmSpec("sgd")
        with pytest.raises(InputError):
            AlgorithmSpec("mixture", components=[(0.5, AlgorithmSpec("erm"))])


class TestMonteCarlo:
    def test_degenerate_problem_point_mass(self):
        p = FiniteProblem(
            z_labels=["z0"],
            mu=ProbVec(["z0"], [1.0]),
            w_labels=["w0"],
            loss=np.array([[0.3]]),
            n=3,
            algorithm=AlgorithmSpec("table", table=np.array([[1.0]])),
        )
        mc = monte_carlo_gen(p, trials=500, seed=1)
        assert mc.mean == pytest.approx(0.0, abs=1e-15)
        assert mc.quantiles[1.0] == pytest.approx(0.0, abs=1e-15)

    def test_mean_within_four_se(self):
        for p in build_suite()[:8]:
            stats = exact_gen_stats(p)
            mc = monte_carlo_gen(p, trials=40_000, seed=99)
            assert abs(mc.mean - stats.exact_mean_gen) <= 4.0 * mc.stderr + 1e-12

    def test_quantile_level_one_is_max(self):
        p = erm_problem()
        mc = monte_carlo_gen(p, trials=5000, seed=5)
        assert mc.quantiles[1.0] == pytest.approx(float(mc.values.max()))
        assert mc.quantile_at_delta(1.0) == pytest.approx(float(mc.values.min()))

    def test_deterministic_per_seed(self):
        p = erm_problem()
        a = monte_carlo_gen(p, trials=2000, seed=31)
        b = monte_carlo_gen(p, trials=2000, seed=31)
        assert np.array_equal(a.values, b.values)


class TestCompareReport:
    def test_no_critical_on_two_by_two(self):
        p = two_by_two_suite()[0]
        rep = compare_report(
            p,
            kinds=("lossless_mi", "exact_two_sided", "per_sample", "cmi_full", "tail_kl_ball"),
            delta=0.1,
            trials=20_000,
            grid_step=0.02,
        )
        assert not rep.critical
        assert {r.kind for r in rep.rows} == {
            "lossless_mi",
            "exact_two_sided",
            "per_sample",
            "cmi_full",
            "tail_kl_ball",
        }

    def test_json_round_trip_fields(self):
        p = get_problem("p05_erm_fair_matched")
        rep = compare_report(p, kinds=("lossless_mi",))
        obj = rep.to_json_dict()
        assert obj["problem"] == "p05_erm_fair_matched"
        assert obj["rows"][0]["ok"] is True

    def test_unknown_kind_rejected(self):
        with pytest.raises(InputError):
            compare_report(erm_problem(), kinds=("nonsense",))


class TestJsonSchema:
    def test_problem_json_round_trip(self):
        p = get_problem("p10_gibbs2_skewmu_skewed")
        obj = p.to_json_dict()
        q = FiniteProblem.from_json_dict(obj)
        assert q.name == p.name
        assert np.allclose(q.loss, p.loss)
        assert q.algorithm.kind == "gibbs" and q.algorithm.beta == 2.0

    def test_rejects_missing_keys(self):
        with pytest.raises(InputError):
            FiniteProblem.from_json_dict({"z": ["a"], "mu": [1.0]})

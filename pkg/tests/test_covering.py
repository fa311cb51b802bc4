import math

import numpy as np
import pytest

from rdgen import InputError, ProbVec
from rdgen.covering import (
    block_distortion,
    dv_check,
    rho_distortion,
    simulate_covering,
    simulate_source_covering,
    variational_mean_check,
    variational_tail_check,
    verify_block_tail,
)
from rdgen.harness import AlgorithmSpec, FiniteProblem
from rdgen.rd_solver import DistortionMatrix


def bernoulli_source():
    return ProbVec([0, 1], [0.5, 0.5]), DistortionMatrix([0, 1], [0, 1], [[0, 1], [1, 0]])


def small_problem():
    return FiniteProblem(
        z_labels=["z0", "z1"],
        mu=ProbVec(["z0", "z1"], [0.5, 0.5]),
        w_labels=["w0", "w1"],
        loss=np.array([[0.0, 1.0], [1.0, 0.0]]),
        n=1,
        algorithm=AlgorithmSpec("erm"),
        name="tiny",
    )


class TestRho:
    def test_constant_sequences(self):
        assert rho_distortion([0.3, 0.3], [0.3, 0.3]) == 0.0

    def test_min_minus_mean(self):
        assert rho_distortion([1, 2, 3], [0, 0, 0]) == pytest.approx(1.0, abs=1e-15)

    def test_hand_value(self):
        # min(0.5, -0.2) - mean(0.1, 0.3) = -0.2 - 0.2
        assert rho_distortion([0.5, -0.2], [0.1, 0.3]) == pytest.approx(-0.4, abs=1e-15)

    def test_length_mismatch(self):
        with pytest.raises(InputError):
            rho_distortion([1, 2], [0])


class TestBlockDistortion:
    def test_identical_sequences_zero(self):
        for kind in ("theta", "abs_theta"):
            assert block_distortion(kind, [0.1, 0.4], [0.1, 0.4]) == pytest.approx(
                0.0, abs=1e-15
            )
        # the min-minus-mean kind vanishes on identical sequences only when
        # they are constant (a min equals a mean only then)
        assert block_distortion("phi", [0.3, 0.3], [0.3, 0.3]) == pytest.approx(
            0.0, abs=1e-15
        )

    def test_hand_values(self):
        assert block_distortion("theta", [0.3, 0.1], [0.0, 0.0]) == pytest.approx(0.2)
        assert block_distortion("phi", [0.3, 0.1], [0.0, 0.0]) == pytest.approx(0.1)

    def test_phi_never_exceeds_theta(self):
        rng = np.random.default_rng(3)
        for _ in range(500):
            m = int(rng.integers(1, 12))
            a = rng.normal(size=m)
            b = rng.normal(size=m)
            assert block_distortion("phi", a, b) <= block_distortion("theta", a, b) + 1e-12

    def test_length_mismatch(self):
        with pytest.raises(InputError):
            block_distortion("theta", [1.0], [1.0, 2.0])


class TestSimulateCovering:
    def test_full_codebook_zero_error(self):
        # rate big enough that every sequence is a codeword candidate and the
        # slack exceeds the worst block distortion: no trial can fail
        src, ham = bernoulli_source()
        res = simulate_source_covering(
            src, ham, rate=1.5, epsilon=1.0, m_values=[4], trials=200, seed=3,
            mode="explicit",
        )
        assert res.error_freq == [0.0]

    def test_modes_agree_in_expectation(self):
        src, ham = bernoulli_source()
        kw = dict(rate=0.6, epsilon=0.11, m_values=[12], seed=5)
        explicit = simulate_source_covering(src, ham, trials=4000, mode="explicit", **kw)
        analytic = simulate_source_covering(src, ham, trials=400, mode="analytic", **kw)
        se = 3.0 * (explicit.stderr[0] + analytic.stderr[0]) + 1e-6
        assert abs(explicit.error_freq[0] - analytic.error_freq[0]) <= se

    def test_trend_in_rate_and_epsilon(self):
        src, ham = bernoulli_source()
        base = dict(m_values=[40], trials=300, seed=17)
        errs_by_rate = [
            simulate_source_covering(src, ham, rate=r, epsilon=0.11, **base).error_freq[0]
            for r in (0.25, 0.36, 0.45)
        ]
        assert errs_by_rate[0] >= errs_by_rate[1] >= errs_by_rate[2]
        errs_by_eps = [
            simulate_source_covering(src, ham, rate=0.36, epsilon=e, **base).error_freq[0]
            for e in (0.05, 0.11, 0.2)
        ]
        assert errs_by_eps[0] >= errs_by_eps[1] >= errs_by_eps[2]

    def test_achievability_and_converse_trend(self):
        src, ham = bernoulli_source()
        hi = simulate_source_covering(
            src, ham, rate=0.45, epsilon=0.11, m_values=[50, 100, 200], trials=300, seed=11
        )
        logs = hi.log_error_freq
        assert all(b < a for a, b in zip(logs, logs[1:]))
        lo = simulate_source_covering(
            src, ham, rate=0.25, epsilon=0.11, m_values=[200], trials=300, seed=11
        )
        assert lo.error_freq[0] > 0.9

    def test_bit_identical_reruns(self):
        src, ham = bernoulli_source()
        a = simulate_source_covering(src, ham, 0.4, 0.11, [30, 60], trials=250, seed=9)
        b = simulate_source_covering(src, ham, 0.4, 0.11, [30, 60], trials=250, seed=9)
        assert a.error_freq == b.error_freq
        assert a.log_error_freq == b.log_error_freq

    def test_problem_mode_phi_easier_than_theta(self):
        # phi <= theta pointwise, so covering is easier and failures rarer
        prob = small_problem()
        kw = dict(rate=0.5, epsilon=0.05, m_values=[30], trials=300, seed=4)
        err_theta = simulate_covering(prob, kind="theta", **kw).error_freq[0]
        err_phi = simulate_covering(prob, kind="phi", **kw).error_freq[0]
        assert err_phi <= err_theta + 1e-12

    def test_invalid_inputs(self):
        src, ham = bernoulli_source()
        with pytest.raises(InputError):
            simulate_source_covering(src, ham, rate=-0.1, epsilon=0.1, m_values=[10])


class TestVerifyBlockTail:
    def test_equality_fixture_closed_form(self):
        x = ProbVec([0.0, 1.0], [0.5, 0.5])
        rep = verify_block_tail(
            x, [{"kind": "constant", "value": 0.0}], threshold=0.5, epsilon=0.0, m=10
        )
        assert rep.lhs == pytest.approx(0.5**10, abs=1e-18)
        assert rep.term_mean == pytest.approx(0.0, abs=1e-15)
        assert rep.term_rho == pytest.approx(0.5**10, rel=1e-12)
        assert rep.rhs == pytest.approx(rep.lhs, rel=1e-12)
        assert rep.holds

    def test_equality_fixture_monte_carlo(self):
        x = ProbVec([0.0, 1.0], [0.5, 0.5])
        rep = verify_block_tail(
            x,
            [{"kind": "constant", "value": 0.0}],
            threshold=0.5,
            epsilon=0.0,
            m=10,
            trials=10**5,
            seed=12,
            mode="monte_carlo",
        )
        se = math.sqrt(rep.lhs * (1 - rep.lhs) / 10**5)
        assert abs(rep.rhs - rep.lhs) <= 3.0 * (se + rep.stderr) + 1e-9
        assert rep.holds

    def test_threshold_below_support(self):
        x = ProbVec([0.2, 0.7], [0.4, 0.6])
        rep = verify_block_tail(
            x, [{"kind": "constant", "value": 0.0}], threshold=0.1, epsilon=0.0, m=6
        )
        assert rep.lhs == pytest.approx(1.0)
        assert rep.holds and rep.rhs >= 1.0 - 1e-12

    def test_random_quantizers_margin(self):
        x = ProbVec([0.0, 1.0, 2.0], [1 / 3, 1 / 3, 1 / 3])
        quantizers = [
            {"kind": "iid", "dist": ProbVec([0.0, 2.0], [0.7, 0.3])},
            {"kind": "conditional", "table": {
                0.0: ProbVec([0.0], [1.0]),
                1.0: ProbVec([0.0, 1.0], [0.5, 0.5]),
                2.0: ProbVec([1.0, 2.0], [0.5, 0.5]),
            }},
        ]
        rep = verify_block_tail(
            x, quantizers, threshold=1.5, epsilon=0.0, m=10,
            trials=10**5, seed=21, mode="monte_carlo",
        )
        assert rep.margin >= -3.0 * rep.stderr
        closed = verify_block_tail(x, quantizers, threshold=1.5, epsilon=0.0, m=10)
        assert closed.holds
        assert abs(closed.term_mean - rep.term_mean) <= 4 * rep.stderr + 1e-3
        assert abs(closed.term_rho - rep.term_rho) <= 4 * rep.stderr + 1e-3


class TestDvCheck:
    def test_zero_test_function(self):
        p = ProbVec([0, 1], [0.5, 0.5])
        q = ProbVec([0, 1], [0.9, 0.1])
        rep = dv_check(p, q, [0.0, 0.0])
        assert rep.rhs == pytest.approx(0.0, abs=1e-15)
        assert rep.lhs >= 0.0 and rep.holds

    def test_equality_at_log_ratio(self):
        rng = np.random.default_rng(42)
        labels = [0, 1, 2, 3]
        for _ in range(50):
            pw = rng.exponential(size=4); pw /= pw.sum()
            qw = rng.exponential(size=4); qw /= qw.sum()
            phi = np.log(qw / pw)
            rep = dv_check(ProbVec(labels, pw), ProbVec(labels, qw), phi)
            assert abs(rep.gap) <= 1e-12

    def test_random_triples_and_shift_invariance(self):
        rng = np.random.default_rng(7)
        labels = [0, 1, 2, 3]
        for _ in range(1000):
            pw = rng.exponential(size=4); pw /= pw.sum()
            qw = rng.exponential(size=4); qw /= qw.sum()
            phi = rng.normal(size=4) * 3.0
            rep = dv_check(ProbVec(labels, pw), ProbVec(labels, qw), phi)
            assert rep.gap >= -1e-12
            shifted = dv_check(ProbVec(labels, pw), ProbVec(labels, qw), phi + 17.3)
            assert abs(shifted.rhs - rep.rhs) <= 1e-12

    def test_unsupported_q_trivially_holds(self):
        p = ProbVec([0, 1], [1.0, 0.0])
        q = ProbVec([0, 1], [0.5, 0.5])
        rep = dv_check(p, q, [0.3, -0.1])
        assert math.isinf(rep.lhs) and rep.holds


class TestVariationalMean:
    def test_point_mass(self):
        nu = ProbVec([2.5], [1.0])
        for lam in (0.7, -1.3):
            rep = variational_mean_check(nu, lam, n_random=50, seed=1)
            assert rep.expectation == pytest.approx(2.5)
            assert rep.holds

    def test_uniform_binary(self):
        nu = ProbVec([0.0, 1.0], [0.5, 0.5])
        rep = variational_mean_check(nu, 1.0, n_random=1000, seed=2)
        # bracket at the tilted reference equals lam * E[X] = 0.5
        assert rep.tilted_bracket == pytest.approx(0.5, abs=1e-12)
        assert rep.holds

    def test_random_support_negative_lam(self):
        rng = np.random.default_rng(15)
        vals = sorted(rng.normal(size=5).tolist())
        w = rng.exponential(size=5)
        w /= w.sum()
        rep = variational_mean_check(ProbVec(vals, w), -2.0, n_random=1000, seed=3)
        assert abs(rep.gap) <= 1e-12 * max(1.0, abs(2 * rep.expectation))
        assert rep.random_min_gap >= -1e-12
        assert rep.holds

    def test_lambda_zero_rejected(self):
        with pytest.raises(InputError):
            variational_mean_check(ProbVec([0.0, 1.0], [0.5, 0.5]), 0.0)


class TestVariationalTail:
    def test_uniform_binary(self):
        rep = variational_tail_check(ProbVec([0.0, 1.0], [0.5, 0.5]), 0.5)
        assert rep.log_tail == pytest.approx(math.log(0.5), abs=1e-15)
        assert rep.restricted_objective == pytest.approx(rep.log_tail, abs=1e-12)
        assert rep.holds

    def test_threshold_below_support(self):
        rep = variational_tail_check(ProbVec([0.2, 0.9], [0.3, 0.7]), 0.0)
        assert rep.log_tail == pytest.approx(0.0, abs=1e-15)
        assert rep.holds

    def test_three_point(self):
        rep = variational_tail_check(
            ProbVec([0.0, 1.0, 2.0], [0.2, 0.3, 0.5]), 1.0, grid_resolution=0.02
        )
        assert rep.log_tail == pytest.approx(math.log(0.8), abs=1e-15)
        assert rep.grid_max <= rep.log_tail + 1e-9
        assert rep.holds

    def test_degenerate_empty_tail(self):
        rep = variational_tail_check(ProbVec([0.0, 1.0], [0.5, 0.5]), 5.0)
        assert rep.degenerate and rep.holds and math.isinf(rep.log_tail)

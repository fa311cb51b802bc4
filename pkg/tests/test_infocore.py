import math

import numpy as np
import pytest

from rdgen import InputError, ProbVec, JointTable, Channel
from rdgen.infocore import (
    binary_entropy,
    empirical_type,
    entropy,
    kl_divergence,
    mutual_information,
    product_joint,
)

LOG2 = math.log(2.0)


def random_simplex(rng, k):
    w = rng.exponential(size=k)
    return w / w.sum()


class TestEntropy:
    def test_uniform_binary(self):
        p = ProbVec([0, 1], [0.5, 0.5])
        assert entropy(p) == pytest.approx(LOG2, abs=1e-12)

    def test_point_mass(self):
        p = ProbVec(["a", "b"], [1.0, 0.0])
        assert entropy(p) == 0.0

    def test_quarter_three_quarter(self):
        # direct summation oracle with stdlib math
        expected = -(0.25 * math.log(0.25) + 0.75 * math.log(0.75))
        p = ProbVec([0, 1], [0.25, 0.75])
        assert entropy(p) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.5623351446188083, abs=1e-12)

    def test_upper_bound_uniform_only(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            k = int(rng.integers(2, 8))
            w = random_simplex(rng, k)
            h = entropy(ProbVec(list(range(k)), w))
            assert h <= math.log(k) + 1e-10
        k = 5
        h_unif = entropy(ProbVec(list(range(k)), np.full(k, 1.0 / k)))
        assert h_unif == pytest.approx(math.log(k), abs=1e-10)


class TestBinaryEntropy:
    def test_half(self):
        assert binary_entropy(0.5) == pytest.approx(LOG2, abs=1e-12)

    def test_zero_convention(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0

    def test_point_eleven(self):
        expected = -(0.11 * math.log(0.11) + 0.89 * math.log(0.89))
        assert binary_entropy(0.11) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.34651533691866576, abs=1e-12)

    def test_domain(self):
        with pytest.raises(InputError):
            binary_entropy(-0.01)
        with pytest.raises(InputError):
            binary_entropy(1.01)


class TestKl:
    def test_equal_is_zero(self):
        p = ProbVec([0, 1, 2], [0.2, 0.5, 0.3])
        assert kl_divergence(p, p) == 0.0

    def test_log2_case(self):
        q = ProbVec([0, 1], [1.0, 0.0])
        p = ProbVec([0, 1], [0.5, 0.5])
        assert kl_divergence(q, p) == pytest.approx(LOG2, abs=1e-12)

    def test_nine_one(self):
        expected = 0.9 * math.log(0.9 / 0.5) + 0.1 * math.log(0.1 / 0.5)
        q = ProbVec([0, 1], [0.9, 0.1])
        p = ProbVec([0, 1], [0.5, 0.5])
        assert kl_divergence(q, p) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.3680642071684971, abs=1e-12)

    def test_infinite_when_not_dominated(self):
        q = ProbVec([0, 1], [0.5, 0.5])
        p = ProbVec([0, 1], [1.0, 0.0])
        assert kl_divergence(q, p) == float("inf")

    def test_alphabet_mismatch(self):
        with pytest.raises(InputError):
            kl_divergence(ProbVec([0, 1], [0.5, 0.5]), ProbVec([0, 2], [0.5, 0.5]))

    def test_gibbs_nonnegative_zero_iff_equal(self):
        rng = np.random.default_rng(11)
        labels = [0, 1, 2, 3]
        for _ in range(1000):
            q = random_simplex(rng, 4)
            p = random_simplex(rng, 4)
            d = kl_divergence(ProbVec(labels, q), ProbVec(labels, p))
            assert d >= 0.0
            if np.max(np.abs(q - p)) > 1e-6:
                assert d > 0.0


class TestMutualInformation:
    def test_product_is_zero(self):
        j = product_joint(ProbVec([0, 1], [0.3, 0.7]), ProbVec(["x", "y"], [0.6, 0.4]))
        assert mutual_information(j) == pytest.approx(0.0, abs=1e-12)

    def test_identity_coupling(self):
        j = JointTable([0, 1], [0, 1], [[0.5, 0.0], [0.0, 0.5]])
        assert mutual_information(j) == pytest.approx(LOG2, abs=1e-12)

    def test_four_one_table(self):
        cells = np.array([[0.4, 0.1], [0.1, 0.4]])
        # entropy-decomposition oracle: H(rows) + H(cols) - H(joint)
        def h(ws):
            return -sum(w * math.log(w) for w in ws if w > 0)

        expected = h(cells.sum(1)) + h(cells.sum(0)) - h(cells.ravel())
        j = JointTable([0, 1], [0, 1], cells)
        assert mutual_information(j) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.19274475702175742, abs=1e-12)

    def test_equals_kl_to_product(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            cells = rng.exponential(size=(3, 4))
            cells /= cells.sum()
            j = JointTable(list(range(3)), list(range(4)), cells)
            prod = np.outer(cells.sum(1), cells.sum(0))
            ref = float(
                sum(
                    c * math.log(c / p)
                    for c, p in zip(cells.ravel(), prod.ravel())
                    if c > 1e-15
                )
            )
            assert mutual_information(j) == pytest.approx(ref, abs=1e-10)


class TestEmpiricalType:
    def test_counting(self):
        t = empirical_type(["a", "a", "b", "a"], ["a", "b"])
        assert np.allclose(t.weights, [0.75, 0.25])

    def test_single(self):
        t = empirical_type(["a"], ["a", "b"])
        assert np.allclose(t.weights, [1.0, 0.0])

    def test_three_symbols(self):
        t = empirical_type(list("abbccc"), ["a", "b", "c"])
        assert np.allclose(t.weights, [1 / 6, 2 / 6, 3 / 6])

    def test_unknown_symbol(self):
        with pytest.raises(InputError):
            empirical_type(["a", "z"], ["a", "b"])

    def test_iid_convergence_tv(self):
        rng = np.random.default_rng(2024)
        p = np.array([0.5, 0.3, 0.2])
        labels = [0, 1, 2]
        m = 10**5
        failures = 0
        reps = 50
        for _ in range(reps):
            seq = rng.choice(labels, size=m, p=p)
            t = empirical_type(seq.tolist(), labels)
            tv = 0.5 * np.abs(t.weights - p).sum()
            if tv >= 0.02:
                failures += 1
        assert failures / reps <= 0.01


class TestContainers:
    def test_probvec_invariants(self):
        with pytest.raises(InputError, match="sum to 1"):
            ProbVec([0, 1], [0.5, 0.6])
        with pytest.raises(InputError, match=">= 0"):
            ProbVec([0, 1], [1.5, -0.5])
        with pytest.raises(InputError, match="unique"):
            ProbVec([0, 0], [0.5, 0.5])
        with pytest.raises(InputError):
            ProbVec([], [])

    def test_joint_invariants(self):
        with pytest.raises(InputError, match="total mass"):
            JointTable([0], [0, 1], [[0.5, 0.6]])
        with pytest.raises(InputError, match=">= 0"):
            JointTable([0], [0, 1], [[1.2, -0.2]])

    def test_channel_invariants(self):
        with pytest.raises(InputError, match="row must sum"):
            Channel([0, 1], [0, 1], [[0.5, 0.5], [0.7, 0.4]])

    def test_json_round_trip(self):
        p = ProbVec(["a", "b"], [0.25, 0.75])
        assert ProbVec.from_json_dict(p.to_json_dict()).weights.tolist() == [0.25, 0.75]
        j = JointTable([0, 1], [0, 1], [[0.4, 0.1], [0.1, 0.4]])
        assert np.allclose(JointTable.from_json_dict(j.to_json_dict()).cells, j.cells)
        c = Channel([0, 1], [0, 1], [[0.9, 0.1], [0.2, 0.8]])
        assert np.allclose(Channel.from_json_dict(c.to_json_dict()).rows, c.rows)

    def test_json_rejects_with_diagnostic(self):
        with pytest.raises(InputError, match="sum to 1"):
            ProbVec.from_json_dict({"labels": [0, 1], "weights": [0.7, 0.7]})
        with pytest.raises(InputError, match="'labels'"):
            ProbVec.from_json_dict({"weights": [1.0]})

    def test_reordered(self):
        p = ProbVec(["a", "b", "c"], [0.2, 0.3, 0.5])
        q = p.reordered(["c", "a", "b"])
        assert q.labels == ["c", "a", "b"]
        assert q.weights.tolist() == [0.5, 0.2, 0.3]

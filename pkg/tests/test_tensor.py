import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncelm.tensor import ROLE_TAGS, RngStream, log_sum_exp, matmul, rng_uniform


def naive_matmul(a, b):
    out = [[0.0] * len(b[0]) for _ in range(len(a))]
    for i in range(len(a)):
        for j in range(len(b[0])):
            for k in range(len(b)):
                out[i][j] += a[i][k] * b[k][j]
    return np.array(out)


class TestMatmul:
    def test_hand_example(self):
        np.testing.assert_array_equal(matmul([[1, 2], [3, 4]], [[1], [1]]), [[3], [7]])

    def test_identity(self):
        a = RngStream(3).random((4, 6))
        np.testing.assert_array_equal(matmul(a, np.eye(6)), a)

    def test_against_triple_loop(self):
        rng = RngStream(11)
        a, b = rng.normal(1.0, (7, 5)), rng.normal(1.0, (5, 3))
        expected = naive_matmul(a.tolist(), b.tolist())
        np.testing.assert_allclose(matmul(a, b), expected, rtol=1e-12)

    def test_associativity(self):
        rng = RngStream(5)
        a, b, c = (rng.normal(1.0, (6, 6)) for _ in range(3))
        np.testing.assert_allclose(matmul(matmul(a, b), c), matmul(a, matmul(b, c)), rtol=1e-9, atol=1e-12)

    def test_shape_mismatch_names_shapes(self):
        with pytest.raises(ValueError, match=r"\(2, 3\) x \(2, 3\)"):
            matmul(np.zeros((2, 3)), np.zeros((2, 3)))


class TestLogSumExp:
    def test_two_zeros(self):
        assert log_sum_exp([0.0, 0.0]) == pytest.approx(math.log(2), abs=1e-15)

    @pytest.mark.parametrize("a", [-1e300, -3.5, 0.0, 42.0, 1e300])
    def test_singleton(self, a):
        assert log_sum_exp([a]) == a

    def test_no_overflow(self):
        assert log_sum_exp([1000.0, 1000.0]) == pytest.approx(1000 + math.log(2), rel=1e-15)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            log_sum_exp([])

    def test_axis(self):
        v = np.array([[0.0, 0.0], [1.0, 3.0]])
        np.testing.assert_allclose(log_sum_exp(v, axis=1), [math.log(2), math.log(math.e + math.e ** 3)])

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
    def test_bounds(self, v):
        m = max(v)
        out = log_sum_exp(v)
        assert out >= m - 1e-9 * max(1.0, abs(m))
        assert out <= m + math.log(len(v)) + 1e-9 * max(1.0, abs(m))


class TestRng:
    def test_replay(self):
        assert np.array_equal(rng_uniform(RngStream(7), 0, 1, 100), rng_uniform(RngStream(7), 0, 1, 100))

    def test_range_and_mean(self):
        x = rng_uniform(RngStream(8), -1.0, 1.0, 10**5)
        assert x.min() >= -1.0 and x.max() < 1.0
        # 3 sigma of the mean of 1e5 U(-1,1) draws is 3*sqrt(1/3)/sqrt(1e5) ~ 0.0055
        assert abs(x.mean()) < 0.02

    def test_bad_range(self):
        with pytest.raises(ValueError):
            rng_uniform(RngStream(0), 1.0, 1.0, 3)

    def test_roles_differ_but_replay(self):
        root = RngStream(99)
        seqs = {r: root.split(r).random(20) for r in ("init", "dropout", "noise")}
        assert not np.array_equal(seqs["init"], seqs["dropout"])
        assert not np.array_equal(seqs["init"], seqs["noise"])
        assert not np.array_equal(seqs["dropout"], seqs["noise"])
        for r, s in seqs.items():
            assert np.array_equal(RngStream(99, r).random(20), s)

    def test_unknown_role(self):
        with pytest.raises(ValueError):
            RngStream(1, "bogus")
        assert set(ROLE_TAGS) >= {"init", "dropout", "noise"}

    def test_state_roundtrip(self):
        s = RngStream(4, "noise")
        s.random(5)
        state = s.get_state()
        a = s.random(10)
        s.set_state(state)
        assert np.array_equal(s.random(10), a)

    @settings(max_examples=25)
    @given(st.integers(0, 2**64 - 1))
    def test_any_64bit_seed(self, seed):
        assert np.array_equal(RngStream(seed).random(3), RngStream(seed).random(3))

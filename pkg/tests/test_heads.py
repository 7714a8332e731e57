import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncelm.heads import (
    HeadParams,
    NceBatchSample,
    nce_loss,
    nce_loss_and_grads,
    nce_posteriors,
    softmax_log_probs,
    softmax_loss_and_grads,
)
from ncelm.oracle import check_nce_head, check_softmax_head, nce_instance
from ncelm.tensor import RngStream


def naive_nce_loss(theta, bias, ln_z, v, targets, t_pn, noise_ids, noise_pn, shared):
    """Direct transcription: probabilities, posteriors, logs, loops."""
    total = 0.0
    k = noise_ids.shape[-1]
    for i in range(len(targets)):
        def p_model(w):
            return math.exp(float(theta[w] @ v[i] + bias[w]) - ln_z)

        pt = p_model(targets[i])
        total -= math.log(pt / (pt + k * t_pn[i]))
        row_ids = noise_ids if shared else noise_ids[i]
        row_pn = noise_pn if shared else noise_pn[i]
        for w, pn in zip(row_ids, row_pn):
            pw = p_model(w)
            total -= math.log(k * pn / (pw + k * pn))
    return total / len(targets)


class TestSoftmax:
    def test_hand_example(self):
        head = HeadParams(np.zeros((3, 1)), np.array([10.0, 0.0, 0.0]))
        _, logp = softmax_log_probs(head, np.zeros((1, 1)), np.array([0]))
        assert math.exp(logp[0]) == pytest.approx(0.9999092, abs=1e-7)

    def test_uniform_scores(self):
        head = HeadParams(np.zeros((7, 2)), np.zeros(7))
        nll, _ = softmax_log_probs(head, np.ones((3, 2)), np.array([0, 3, 6]))
        assert nll == pytest.approx(math.log(7), abs=1e-12)

    def test_sums_to_one_and_shift_invariant(self):
        rng = RngStream(1)
        head = HeadParams(rng.normal(1.0, (9, 4)), rng.normal(1.0, 9))
        v = rng.normal(1.0, (5, 4))
        full = np.stack([softmax_log_probs(head, v, np.full(5, w))[1] for w in range(9)], axis=1)
        np.testing.assert_allclose(np.exp(full).sum(axis=1), 1.0, atol=1e-12)
        shifted = HeadParams(head.theta, head.bias + 1234.5)
        np.testing.assert_allclose(softmax_log_probs(shifted, v, np.arange(5))[1], full[np.arange(5), np.arange(5)], atol=1e-9)

    def test_large_logits_finite(self):
        head = HeadParams(np.zeros((3, 1)), np.array([1000.0, 999.0, -1000.0]))
        nll, g_theta, g_bias, g_v = softmax_loss_and_grads(head, np.zeros((1, 1)), np.array([2]))
        assert math.isfinite(nll) and np.all(np.isfinite(g_bias))

    def test_gradients(self):
        for r in check_softmax_head(seed=4):
            assert r.max_rel_err < 1e-5, r

    def test_bad_target(self):
        head = HeadParams(np.zeros((3, 1)), np.zeros(3))
        with pytest.raises(ValueError):
            softmax_log_probs(head, np.zeros((1, 1)), np.array([3]))


class TestNcePosteriors:
    def test_hand_example(self):
        p1, p0 = nce_posteriors(1.0, 1, 0.5)
        assert p1 == pytest.approx(2 / 3) and p0 == pytest.approx(1 / 3)

    @given(
        st.floats(0, 1e6), st.integers(1, 5000), st.floats(1e-9, 1.0),
    )
    def test_bounds_and_complement(self, p, k, pn):
        p1, p0 = nce_posteriors(p, k, pn)
        assert 0.0 <= p1 <= 1.0 and 0.0 <= p0 <= 1.0
        assert p1 + p0 == pytest.approx(1.0, abs=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError):
            nce_posteriors(1.0, 0, 0.5)
        with pytest.raises(ValueError):
            nce_posteriors(1.0, 1, 0.0)


class TestNceLoss:
    def test_hand_example(self):
        # p_model = 1 for both words, k = 1, P_n = 1/2
        head = HeadParams(np.zeros((2, 1)), np.zeros(2))
        sample = NceBatchSample([0], [0.5], [1], [0.5])
        loss = nce_loss(head, np.zeros((1, 1)), sample)
        assert loss == pytest.approx(-(math.log(2 / 3) + math.log(1 / 3)), abs=1e-12)
        assert loss == pytest.approx(1.504077, abs=1e-6)

    @pytest.mark.parametrize("shared", [False, True])
    @pytest.mark.parametrize("zmode", ["constant", "learned"])
    def test_matches_naive_loops(self, shared, zmode):
        head, v, s = nce_instance(seed=3, shared=shared, ln_z=0.7)
        ln_z = head.lnZ if zmode == "learned" else 0.0
        expected = naive_nce_loss(head.theta, head.bias, ln_z, v, s.targets, s.target_noise_probs,
                                  s.noise_ids, s.noise_probs, shared)
        assert nce_loss(head, v, s, zmode) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("shared", [False, True])
    @pytest.mark.parametrize("zmode", ["constant", "learned"])
    def test_gradients(self, shared, zmode):
        for r in check_nce_head(seed=5, zmode=zmode, shared=shared):
            assert r.max_rel_err < 1e-5, r

    def test_constant_mode_ignores_lnz(self):
        head, v, s = nce_instance(seed=1, ln_z=2.0)
        a = nce_loss(head, v, s, "constant")
        head.lnZ = -5.0
        assert nce_loss(head, v, s, "constant") == a
        assert nce_loss_and_grads(head, v, s, "constant")[4] is None

    def test_extreme_scores_finite(self):
        head = HeadParams(np.zeros((3, 1)), np.array([800.0, -800.0, 0.0]))
        sample = NceBatchSample([1, 0], [1 / 3, 1 / 3], [[0, 2], [1, 1]], [[1 / 3, 1 / 3], [1 / 3, 1 / 3]])
        loss, g_theta, g_bias, g_v, _ = nce_loss_and_grads(head, np.zeros((2, 1)), sample)
        assert math.isfinite(loss) and np.all(np.isfinite(g_bias))

    def test_noise_rows_only(self):
        head, v, s = nce_instance(seed=2, vocab=12, k=2)
        _, g_theta, g_bias, _, _ = nce_loss_and_grads(head, v, s)
        touched = set(s.targets.tolist()) | set(s.noise_ids.ravel().tolist())
        untouched = [w for w in range(12) if w not in touched]
        assert np.all(g_bias[untouched] == 0) and np.all(g_theta[untouched] == 0)

    def test_sample_validation(self):
        with pytest.raises(ValueError):
            NceBatchSample([0], [0.5], [1], [0.0])
        with pytest.raises(ValueError):
            NceBatchSample([0, 1], [0.5, 0.5], [[1]], [[0.5]])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 20), st.integers(0, 10**6))
    def test_loss_positive(self, k, seed):
        head, v, s = nce_instance(seed=seed, k=k)
        assert nce_loss(head, v, s) > 0

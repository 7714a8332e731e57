import numpy as np
import pytest

from ncelm.oracle import (
    GRAD_TOL,
    build_noise_from_probs,
    check_full_model,
    compare_grads,
    consistency_suite,
    exact_nce_gradient,
    exact_nce_objective,
    finite_diff_grad,
    grad_check_suite,
    kl_divergence,
    nce_consistency_fit,
    rel_error,
    reports_to_csv,
    sampled_vs_exact_nce,
)


class TestFiniteDifferences:
    def test_quadratic(self):
        x = np.array([1.0, -2.0, 3.0])
        g = finite_diff_grad(lambda: float(np.sum(x ** 2)), {"x": x})
        np.testing.assert_allclose(g["x"], 2 * x, rtol=1e-9)
        np.testing.assert_array_equal(x, [1.0, -2.0, 3.0])

    def test_rel_error_floor(self):
        assert rel_error(0.0, 1e-12) == pytest.approx(1e-4)
        assert rel_error(2.0, 1.0) == pytest.approx(0.5)

    def test_nondeterministic_loss(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError, match="deterministic"):
            finite_diff_grad(lambda: float(rng.random()), {"x": np.zeros(1)})

    def test_detects_wrong_gradient(self):
        x = np.array([1.0, 2.0])
        num = finite_diff_grad(lambda: float(np.sum(x ** 3)), {"x": x})
        (r,) = compare_grads({"x": 3 * x ** 2 * 1.01}, num)
        assert not r.passed and r.coord == (0,)

    def test_csv(self):
        x = np.array([1.0])
        reports = compare_grads({"x": 2 * x}, finite_diff_grad(lambda: float(x[0] ** 2), {"x": x}))
        lines = reports_to_csv(reports).splitlines()
        assert lines[0] == "tensor,max_rel_err,coord,h" and lines[1].startswith("x,")


class TestGradCheckSuite:
    def test_all_pass(self):
        reports = grad_check_suite()
        assert reports and all(r.max_rel_err < GRAD_TOL for r in reports), [r for r in reports if not r.passed]

    @pytest.mark.parametrize("head,zmode", [("softmax", "constant"), ("nce", "constant"), ("nce", "learned")])
    def test_full_model_other_seed(self, head, zmode):
        for r in check_full_model(seed=11, head=head, zmode=zmode):
            assert r.passed, r


class TestConsistency:
    def test_exact_gradient_matches_objective(self):
        q = np.array([0.4, 0.3, 0.2, 0.1])
        pn = np.array([0.48, 0.24, 0.16, 0.12])
        s = np.array([-0.5, 0.1, -1.2, 0.3])
        num = finite_diff_grad(lambda: exact_nce_objective(s, q, pn, 7), {"s": s})["s"]
        np.testing.assert_allclose(exact_nce_gradient(s, q, pn, 7), num, rtol=1e-7)

    def test_minimiser_is_data_distribution(self):
        q = np.array([0.4, 0.3, 0.2, 0.1])
        pn = np.array([0.48, 0.24, 0.16, 0.12])
        for k in (1, 10, 1000):
            np.testing.assert_allclose(exact_nce_gradient(np.log(q), q, pn, k), 0.0, atol=1e-12)

    def test_kl_trend(self):
        fits = consistency_suite()
        kls = [f.kl_to_mle for f in fits]
        assert all(a > b for a, b in zip(kls, kls[1:])), kls
        assert kls[-1] < 1e-3

    def test_kl_basics(self):
        assert kl_divergence([0.5, 0.5], [0.5, 0.5]) == 0.0
        assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(np.log(2))

    def test_fit_errors(self):
        with pytest.raises(ValueError):
            nce_consistency_fit([1, 2], np.array([0.2, 0.3, 0.5]), 1)
        with pytest.raises(ValueError):
            nce_consistency_fit([0, 0], np.array([0.5, 0.5]), 1)

    def test_sampled_gradient_unbiased(self):
        noise = build_noise_from_probs(np.array([0.48, 0.24, 0.16, 0.12]))
        rep = sampled_vs_exact_nce([4, 3, 2, 1], np.log([0.3, 0.3, 0.2, 0.2]), noise, k=5,
                                   resamples=(10, 1000), seed=3)
        assert rep.deviations[1000] < rep.deviations[10]
        # the exact gradient is per data token; the sampled one averages
        # over 10 positions, so the means agree to Monte-Carlo accuracy
        assert rep.deviations[1000] < 0.01

import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ncelm.optim import (
    TUNED_INIT_RANGES,
    ClipConfig,
    DivergenceError,
    InitHeuristic,
    ScheduleConfig,
    clip_by_global_norm,
    global_norm,
    glorot_range,
    init_params,
    learning_rate,
    sgd_step,
)
from ncelm.tensor import RngStream


class TestSchedule:
    def test_small_example(self):
        cfg = ScheduleConfig(eta0=1.0, psi=2.0, tau=2)
        assert [learning_rate(t, cfg) for t in range(4)] == [1.0, 1.0, 0.5, 0.25]

    def test_large_preset_boundary(self):
        cfg = ScheduleConfig(eta0=1.0, psi=1.15, tau=12)
        assert all(learning_rate(t, cfg) == 1.0 for t in range(12))
        assert learning_rate(12, cfg) == pytest.approx(0.869565, abs=1e-6)
        assert learning_rate(13, cfg) == pytest.approx(1 / 1.15 ** 2, rel=1e-12)

    @given(st.floats(0.01, 10), st.floats(1.01, 5), st.integers(1, 30), st.integers(0, 60))
    def test_non_increasing_and_constant_prefix(self, eta0, psi, tau, t):
        cfg = ScheduleConfig(eta0=eta0, psi=psi, tau=tau)
        assert learning_rate(t + 1, cfg) <= learning_rate(t, cfg)
        if t < tau:
            assert learning_rate(t, cfg) == eta0
        else:
            assert learning_rate(t + 1, cfg) == pytest.approx(learning_rate(t, cfg) / psi, rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            ScheduleConfig(psi=1.0)
        with pytest.raises(ValueError):
            ScheduleConfig(tau=0)
        with pytest.raises(ValueError):
            ScheduleConfig(tau=8).validate(epochs=5)
        with pytest.raises(ValueError):
            learning_rate(-1, ScheduleConfig())

    def test_nce_tau_warning(self):
        with pytest.warns(UserWarning, match="two-thirds"):
            ScheduleConfig(tau=10).validate(epochs=12, head="nce")
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            ScheduleConfig(tau=8).validate(epochs=12, head="nce")
            ScheduleConfig(tau=10).validate(epochs=12, head="softmax")


class TestInit:
    def test_glorot_values(self):
        assert glorot_range(650, 650) == pytest.approx(math.sqrt(6) / math.sqrt(1300), rel=1e-15)
        assert glorot_range(650, 650, quarter=True) == pytest.approx(0.016984, abs=1e-6)

    def test_tuned_table(self):
        assert TUNED_INIT_RANGES == {"S": 0.0153, "M": 0.00849, "L": 0.00625}

    def test_explicit_range_and_zero_bias(self):
        shapes = {"w": (300, 200), "lstm0.b": (40,), "head.bias": (7,), "head.lnZ": ()}
        p = init_params(shapes, InitHeuristic("explicit", -0.1, 0.1), RngStream(0, "init"))
        assert p["w"].min() >= -0.1 and p["w"].max() < 0.1
        assert abs(p["w"].mean()) < 0.002  # 3 sigma = 3*0.1/sqrt(3)/sqrt(6e4)
        assert not p["lstm0.b"].any() and not p["head.bias"].any() and p["head.lnZ"] == 0.0

    def test_glorot_uses_fan(self):
        p = init_params({"w": (100, 100)}, InitHeuristic("glorot_quarter"), RngStream(1), fan=650)
        assert np.abs(p["w"]).max() <= glorot_range(650, 650, quarter=True)
        with pytest.raises(ValueError):
            init_params({"w": (2, 2)}, InitHeuristic("glorot"), RngStream(1))

    def test_gaussian(self):
        p = init_params({"w": (400, 400)}, InitHeuristic("gaussian", sigma=0.01), RngStream(2))
        assert p["w"].std() == pytest.approx(0.01, rel=0.01)

    def test_replay(self):
        a = init_params({"w": (5, 5)}, InitHeuristic(), RngStream(3, "init"))
        b = init_params({"w": (5, 5)}, InitHeuristic(), RngStream(3, "init"))
        np.testing.assert_array_equal(a["w"], b["w"])

    def test_bad_kind(self):
        with pytest.raises(ValueError):
            InitHeuristic("xavier")
        with pytest.raises(ValueError):
            InitHeuristic("explicit", 0.1, -0.1)


class TestClipAndStep:
    def test_clip_example(self):
        out, norm = clip_by_global_norm({"a": np.array([3.0, 4.0])}, ClipConfig(max_norm=1.0))
        assert norm == 5.0
        np.testing.assert_allclose(out["a"], [0.6, 0.8], rtol=1e-15)

    def test_batch_divisor_before_clip(self):
        out, norm = clip_by_global_norm({"a": np.array([30.0, 40.0])}, ClipConfig(max_norm=100.0, batch_divisor=10))
        assert norm == 5.0
        np.testing.assert_allclose(out["a"], [3.0, 4.0])

    @given(st.lists(st.floats(-1e4, 1e4), min_size=1, max_size=20), st.floats(0.01, 100))
    def test_norm_bound_and_direction(self, values, max_norm):
        g = {"a": np.array(values), "b": np.array(values[::-1]) * 0.5}
        out, norm = clip_by_global_norm(g, ClipConfig(max_norm=max_norm))
        assert global_norm(out) <= max_norm * (1 + 1e-12)
        if norm <= max_norm:
            np.testing.assert_array_equal(out["a"], g["a"])
        else:
            np.testing.assert_allclose(out["a"] * norm / max_norm, g["a"], rtol=1e-9, atol=1e-12)

    def test_nan_raises(self):
        with pytest.raises(DivergenceError):
            clip_by_global_norm({"a": np.array([np.nan])}, ClipConfig())

    def test_sgd_step(self):
        p = {"w": np.array([1.0, 2.0])}
        sgd_step(p, {"w": np.array([0.5, -1.0])}, 0.1)
        np.testing.assert_allclose(p["w"], [0.95, 2.1])
        with pytest.raises(ValueError):
            sgd_step(p, {"w": np.zeros(3)}, 0.1)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from s2inet import init, nn
from s2inet.optim import Adam
from s2inet.s2i import build_s2i


def minimise_square(lr, steps):
    theta = nn.Parameter(np.array([1.0]))
    opt = Adam([theta], lr=lr)
    trace = []
    for _ in range(steps):
        theta.grad = 2 * theta.data
        opt.step()
        trace.append(float(theta.data[0]))
    return np.array(trace), opt


class TestAdam:
    @settings(max_examples=30, deadline=None)
    @given(st.floats(-100, 100).filter(lambda g: abs(g) > 1e-3))
    def test_first_step_closed_form(self, g):
        p = nn.Parameter(np.array([0.5]))
        p.grad = np.array([g])
        Adam([p], lr=1e-3).step()
        assert p.data[0] - 0.5 == pytest.approx(-1e-3 * g / (abs(g) + 1e-8), rel=1e-9)
        assert p.data[0] - 0.5 == pytest.approx(-1e-3 * math.copysign(1, g), rel=1e-4)

    def test_zero_gradient_keeps_parameters(self, rng):
        p = nn.Parameter(rng.standard_normal(5))
        before = p.data.copy()
        opt = Adam([p])
        for _ in range(50):
            p.grad = np.zeros(5)
            opt.step()
        np.testing.assert_array_equal(p.data, before)

    def test_square_recurrence(self):
        # values from an independent scalar run of the same update rule
        trace, _ = minimise_square(1e-2, 500)
        assert np.flatnonzero(np.abs(trace) < 1e-2)[0] + 1 == 213
        assert trace[-1] == pytest.approx(4.20016703752107e-09, rel=1e-6, abs=1e-15)
        trace, _ = minimise_square(1e-3, 500)
        assert trace[-1] == pytest.approx(0.5605075254378474, rel=1e-12)

    def test_moments(self, rng):
        trace, opt = minimise_square(1e-2, 20)
        assert opt.t == 20
        assert opt.m[0].shape == opt.v[0].shape == (1,)
        assert opt.v[0][0] >= 0

    def test_missing_gradient(self):
        p = nn.Parameter(np.zeros(2))
        with pytest.raises(RuntimeError):
            Adam([p]).step()

    def test_float32_parameters_stay_float32(self):
        p = nn.Parameter(np.ones(3, dtype=np.float32))
        p.grad = np.ones(3, dtype=np.float32)
        Adam([p]).step()
        assert p.dtype == np.float32


class TestInit:
    def test_bound_for_kernel_three(self):
        assert init.kaiming_uniform_bound(3) == pytest.approx(math.sqrt(2))
        assert init.kaiming_uniform_bound(3) == pytest.approx(1.41421, abs=1e-5)

    @pytest.mark.parametrize("k", [1, 3, 24, 1000])
    def test_a_zero(self, k):
        assert init.kaiming_uniform_bound(k, 0.0) == pytest.approx(math.sqrt(6 / k))
        assert init.kaiming_uniform_bound(k, 1.0) == pytest.approx(math.sqrt(3 / k))

    def test_bad_fan_in(self):
        with pytest.raises(ValueError):
            init.kaiming_uniform_bound(0)

    def test_uniform_statistics(self):
        t = nn.Parameter(np.empty(100_000))
        init.kaiming_uniform_(t, 3, np.random.default_rng(0))
        c = math.sqrt(2)
        assert -c < t.data.min() and t.data.max() < c
        sigma = c / math.sqrt(3) / math.sqrt(t.size)
        assert abs(t.data.mean()) <= 3 * sigma

    def test_s2i_layers(self):
        m = build_s2i("cnn2", np.random.default_rng(0), dtype=np.float64)
        assert m.conv1.fan_in == 3 and m.conv2.fan_in == 24
        assert np.abs(m.conv1.weight.data).max() <= math.sqrt(6 / 3)
        assert np.abs(m.conv2.weight.data).max() <= math.sqrt(6 / 24)
        assert np.abs(m.conv1.bias.data).max() <= 1 / math.sqrt(3)
        # draws should actually use most of the range
        assert np.abs(m.conv2.weight.data).max() > 0.9 * math.sqrt(6 / 24)

    def test_deterministic(self):
        a = build_s2i("cnn1", np.random.default_rng(3)).state_dict()
        b = build_s2i("cnn1", np.random.default_rng(3)).state_dict()
        np.testing.assert_array_equal(a["conv1.weight"], b["conv1.weight"])

    def test_kaiming_normal_std(self):
        t = nn.Parameter(np.empty((64, 16, 3), dtype=np.float32))
        init.kaiming_normal_fan_out_(t, 64 * 3, np.random.default_rng(0))
        assert t.data.std() == pytest.approx(math.sqrt(2 / 192), rel=0.03)

import numpy as np
import pytest

from s2inet.functional import relu_forward
from s2inet.gradcheck import gradcheck
from s2inet.tensor import Function, Tensor


class WrongSquare(Function):
    """x**2 with a deliberately wrong derivative (3x instead of 2x)."""

    def forward(self, x):
        self.x = x
        return x * x

    def backward(self, g):
        return (3 * self.x * g,)


class TestGradcheck:
    def test_accepts_correct_gradient(self, rng):
        x = Tensor(rng.standard_normal(6), requires_grad=True)
        rep = gradcheck(lambda x: x * x * x, [x])
        assert rep.passed(1e-8) and rep.checked == [6] and rep.excluded == [0]

    def test_detects_wrong_gradient(self, rng):
        x = Tensor(rng.standard_normal(6), requires_grad=True)
        rep = gradcheck(lambda x: WrongSquare.apply(x), [x])
        assert rep.worst == pytest.approx(1 / 3, rel=1e-6)
        assert not rep.passed(1e-4)

    def test_requires_float64(self):
        with pytest.raises(TypeError):
            gradcheck(lambda x: x * x, [Tensor(np.ones(2, dtype=np.float32), requires_grad=True)])

    def test_kink_excluded(self):
        x = Tensor(np.array([0.0, 1.0, -2.0]), requires_grad=True)
        rep = gradcheck(lambda x: relu_forward(x) + relu_forward(-x), [x])
        assert rep.excluded == [1] and rep.passed(1e-8)

    def test_sampled_points(self, rng):
        x = Tensor(rng.standard_normal(500), requires_grad=True)
        rep = gradcheck(lambda x: (x * x).sum(), [x], points=20)
        assert rep.checked == [20] and rep.passed(1e-8)

    def test_non_grad_inputs_skipped(self, rng):
        a = Tensor(rng.standard_normal(3), requires_grad=True)
        b = Tensor(rng.standard_normal(3))
        rep = gradcheck(lambda a, b: a * b, [a, b])
        assert rep.checked == [3, 0]

    def test_input_restored(self, rng):
        v = rng.standard_normal(4)
        x = Tensor(v.copy(), requires_grad=True)
        gradcheck(lambda x: x * x, [x])
        np.testing.assert_array_equal(x.data, v)

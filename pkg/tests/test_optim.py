import numpy as np
import pytest

from vjmht.autodiff import NonFiniteError, Tensor
from vjmht.optim import AdamState, adam_step


class TestAdam:
    def test_zero_gradient_from_fresh_state(self):
        p = Tensor([1.0, -2.0])
        adam_step([p], [np.zeros(2)], AdamState(), 0.1)
        np.testing.assert_array_equal(p.data, [1.0, -2.0])

    def test_zero_gradient_decays_moments(self):
        p = Tensor([1.0, -2.0])
        state = AdamState()
        adam_step([p], [np.array([0.4, 0.4])], state, 0.1)
        m, v = state.m[0].copy(), state.v[0].copy()
        adam_step([p], [np.zeros(2)], state, 0.1)
        np.testing.assert_allclose(state.m[0], 0.9 * m, rtol=1e-15)
        np.testing.assert_allclose(state.v[0], 0.999 * v, rtol=1e-15)

    def test_first_step(self):
        g = np.array([0.5, -2.0, 1e-3])
        p = Tensor(np.zeros(3))
        adam_step([p], [g], AdamState(), 0.01)
        np.testing.assert_allclose(p.data, -0.01 * g / (np.abs(g) + 1e-8), rtol=1e-12)

    def test_quadratic_descent(self):
        x = Tensor([1.0])
        state = AdamState()
        f = [1.0]
        for _ in range(10):
            adam_step([x], [2 * x.data], state, 0.05)
            f.append(float(x.data[0] ** 2))
        assert all(b < a for a, b in zip(f, f[1:]))

    def test_hand_computed_second_step(self):
        p = Tensor([0.0])
        state = AdamState()
        adam_step([p], [np.array([1.0])], state, 0.1)
        adam_step([p], [np.array([3.0])], state, 0.1)
        m = 0.9 * 0.1 + 0.1 * 3.0
        v = 0.999 * 0.001 + 0.001 * 9.0
        m_hat, v_hat = m / (1 - 0.81), v / (1 - 0.999 ** 2)
        expect = -0.1 * (1.0 / (1.0 + 1e-8)) - 0.1 * m_hat / (np.sqrt(v_hat) + 1e-8)
        np.testing.assert_allclose(p.data, [expect], rtol=1e-12)

    def test_nan_gradient(self):
        with pytest.raises(NonFiniteError):
            adam_step([Tensor([1.0])], [np.array([np.nan])], AdamState(), 0.1)

    def test_misaligned(self):
        with pytest.raises(ValueError):
            adam_step([Tensor([1.0])], [np.ones(2)], AdamState(), 0.1)
        with pytest.raises(ValueError):
            adam_step([Tensor([1.0])], [], AdamState(), 0.1)

    def test_missing_gradient_is_zero(self):
        p = Tensor([2.0])
        adam_step([p], [None], AdamState(), 0.1)
        assert p.data[0] == 2.0

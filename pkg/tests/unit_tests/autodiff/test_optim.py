##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
import numpy as np
import pytest

from subband_shake import ParameterError, ShapeError
from subband_shake.autodiff import Adam, AdamState, Tensor, adam_step, backward, multiply, total


class TestAdamStep():

    def test_first_step_moves_by_lr(self):
        # bias correction makes the first step lr * sign(grad)
        param = np.array([1.0, -1.0, 0.5])
        state = AdamState(lr=0.01)
        adam_step([param], [np.array([2.0, -3.0, 0.1])], state)
        assert np.allclose(param, [0.99, -0.99, 0.49], atol=1e-6)
        assert state.step_count == 1

    def test_against_reference(self):
        param = np.array([0.3])
        state = AdamState(lr=0.1, beta1=0.5, beta2=0.75)
        m = v = 0.0
        expect = 0.3
        for t, g in enumerate([1.0, -2.0, 0.5], start=1):
            adam_step([param], [np.array([g])], state)
            m = 0.5 * m + 0.5 * g
            v = 0.75 * v + 0.25 * g * g
            expect -= 0.1 * (m / (1 - 0.5 ** t)) / (np.sqrt(v / (1 - 0.75 ** t)) + 1e-8)
        assert np.isclose(param[0], expect)

    def test_missing_grad_is_zero(self):
        a, b = np.array([1.0]), np.array([1.0])
        state = AdamState()
        adam_step([a, b], [np.array([1.0]), None], state)
        assert b[0] == 1.0
        assert a[0] < 1.0

    def test_count_mismatch(self):
        with pytest.raises(ShapeError):
            adam_step([np.zeros(1)], [], AdamState())

    def test_state_mismatch(self):
        state = AdamState()
        adam_step([np.zeros(1)], [np.ones(1)], state)
        with pytest.raises(ShapeError, match="holds 1 moments"):
            adam_step([np.zeros(1), np.zeros(1)], [np.ones(1), np.ones(1)], state)

    @pytest.mark.parametrize("kwargs", [dict(lr=0), dict(eps=-1.0), dict(beta1=1.0), dict(beta2=-0.1)])
    def test_bad_hyperparameters(self, kwargs):
        with pytest.raises(ParameterError):
            AdamState(**kwargs)


class TestAdam():

    def test_minimises_quadratic(self):
        target = np.array([1.0, -2.0])
        x = Tensor(np.zeros(2), requires_grad=True)
        optimiser = Adam([x], lr=0.1)
        for _ in range(500):
            optimiser.zero_grad()
            diff = x + Tensor(-target)
            backward(total(multiply(diff, diff)))
            optimiser.step()
        assert np.allclose(x.data, target, atol=1e-2)

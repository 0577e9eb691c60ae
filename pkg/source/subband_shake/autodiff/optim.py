##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
The Adam optimiser.

"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from subband_shake import ParameterError, ShapeError
from subband_shake.autodiff.tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """
    Moment estimates and hyperparameters of an Adam optimiser.

    The moment lists are created lazily on the first step, one array per parameter.

    """
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first_moment: List[np.ndarray] = field(default_factory=list)
    second_moment: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        for name in ('lr', 'eps'):
            if getattr(self, name) <= 0:
                raise ParameterError(f"adam {name} must be positive, got {getattr(self, name)}")
        for name in ('beta1', 'beta2'):
            if not 0 <= getattr(self, name) < 1:
                raise ParameterError(f"adam {name} must be in [0, 1), got {getattr(self, name)}")


def adam_step(params: Sequence[np.ndarray], grads: Sequence[Optional[np.ndarray]], state: AdamState):
    """
    Apply one bias-corrected Adam update to *params* in place.

    A missing gradient is treated as zero, so the parameter's moments still decay.

    :param params: the parameter arrays, updated in place.
    :param grads: one gradient per parameter, or None.
    :param state: the optimiser state, updated in place.

    """
    if len(params) != len(grads):
        raise ShapeError(f"adam got {len(grads)} gradients for {len(params)} parameters")
    if not state.first_moment:
        state.first_moment = [np.zeros_like(p) for p in params]
        state.second_moment = [np.zeros_like(p) for p in params]
    elif len(state.first_moment) != len(params):
        raise ShapeError(f"adam state holds {len(state.first_moment)} moments "
                         f"but {len(params)} parameters were given")

    state.step_count += 1
    t = state.step_count
    correction1 = 1 - state.beta1 ** t
    correction2 = 1 - state.beta2 ** t
    for i, (param, grad) in enumerate(zip(params, grads)):
        if grad is None:
            grad = np.zeros_like(param)
        if grad.shape != param.shape:
            raise ShapeError(f"adam gradient dims {grad.shape} do not match parameter dims {param.shape}")
        m = state.first_moment[i] = state.beta1 * state.first_moment[i] + (1 - state.beta1) * grad
        v = state.second_moment[i] = state.beta2 * state.second_moment[i] + (1 - state.beta2) * grad * grad
        param -= state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)


class Adam:
    """
    Adam over a fixed list of leaf tensors.

    :param parameters: tensors with requires_grad set.

    """
    def __init__(self, parameters: Sequence[Tensor], lr: float = 0.001, **kwargs):
        self.parameters = list(parameters)
        self.state = AdamState(lr=lr, **kwargs)

    def zero_grad(self):
        for p in self.parameters:
            p.zero_grad()

    def step(self):
        adam_step([p.data for p in self.parameters], [p.grad for p in self.parameters], self.state)

##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
The dense tensor and the reverse-mode differentiation graph.

A :class:`Tensor` wraps a float64 numpy array. Tensors produced by a
:class:`Function` remember their creator, so calling
:meth:`Tensor.backward` on a scalar loss walks the graph in reverse
topological order and accumulates gradients into every leaf with
``requires_grad`` set.

"""
import logging
from abc import ABC, abstractmethod
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from subband_shake import ContractError, ShapeError

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, float, int, Sequence]


class Phase(Enum):
    '''Whether a forward pass is part of training or evaluation.'''
    TRAIN = "train"
    EVAL = "eval"

    def __str__(self):
        return self.value


class Function(ABC):
    """
    Base class for differentiable operations.

    Subclasses implement :meth:`forward` on plain arrays and
    :meth:`backward`, which maps the gradient of the output to one
    gradient (or None) per input tensor.

    """
    def __init__(self, *inputs: "Tensor"):
        self.inputs = inputs

    @abstractmethod
    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError(f"forward must be implemented for "
                                  f"'{type(self).__name__}'.")

    @abstractmethod
    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        raise NotImplementedError(f"backward must be implemented for "
                                  f"'{type(self).__name__}'.")

    @classmethod
    def apply(cls, *tensors: "Tensor", **kwargs: Any) -> "Tensor":
        """
        Run the forward pass and wrap the result in a graph-connected tensor.

        """
        func = cls(*tensors)
        out = func.forward(*(t.data for t in tensors), **kwargs)
        requires_grad = any(t.requires_grad for t in tensors)
        return Tensor(out, requires_grad=requires_grad,
                      creator=func if requires_grad else None)


class Tensor:
    """
    A dense n-dimensional float64 array in a differentiation graph.

    :param data: values, converted to a float64 array.
    :param requires_grad: whether gradients should be accumulated.
    :param creator: the function which produced this tensor, None for leaves.

    """
    def __init__(self, data: ArrayLike, requires_grad: bool = False,
                 creator: Optional[Function] = None):
        self.data: np.ndarray = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.creator = creator
        self._grad: Optional[np.ndarray] = None

    @property
    def dims(self) -> Tuple[int, ...]:
        ''':returns: the tensor dimensions.'''
        return self.data.shape

    shape = dims

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def grad(self) -> Optional[np.ndarray]:
        ''':returns: the accumulated gradient, same dims as the tensor.'''
        return self._grad

    @grad.setter
    def grad(self, value: Optional[np.ndarray]):
        if value is None:
            self._grad = None
            return
        value = np.asarray(value, dtype=np.float64)
        if value.shape != self.dims:
            raise ShapeError(f"gradient dims {value.shape} do not match "
                             f"tensor dims {self.dims}")
        self._grad = value

    def zero_grad(self):
        self._grad = None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def __repr__(self):
        return f"Tensor(dims={self.dims}, requires_grad={self.requires_grad})"

    # graph sugar, the functions themselves live in autodiff.functions
    def __add__(self, other):
        from subband_shake.autodiff.functions import add
        return add(self, _as_tensor(other))

    __radd__ = __add__

    def __mul__(self, other):
        from subband_shake.autodiff.functions import multiply
        return multiply(self, _as_tensor(other))

    __rmul__ = __mul__

    def __getitem__(self, index):
        from subband_shake.autodiff.functions import take
        return take(self, index)

    def sum(self) -> "Tensor":
        from subband_shake.autodiff.functions import total
        return total(self)

    def reshape(self, *dims) -> "Tensor":
        from subband_shake.autodiff.functions import reshape
        if len(dims) == 1 and isinstance(dims[0], (tuple, list)):
            dims = tuple(dims[0])
        return reshape(self, dims)

    def backward(self):
        backward(self)


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _topological_order(root: Tensor) -> List[Tensor]:
    # iterative post-order, deep graphs must not hit the recursion limit
    order: List[Tensor] = []
    visited = set()
    stack: List[Tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        if node.creator is not None:
            for parent in node.creator.inputs:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
    return order


def backward(loss: Tensor):
    """
    Populate ``grad`` for every ``requires_grad`` leaf reachable from *loss*.

    Gradients accumulate additively, both across fan-out inside one graph
    and across repeated calls; use :meth:`Tensor.zero_grad` between steps.

    :raises ContractError: if *loss* is not a scalar.

    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar root, got dims {loss.dims}")
    if not loss.requires_grad:
        logger.debug("backward called on a tensor outside any graph")
        return

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topological_order(loss)):
        grad = grads.pop(id(node), None)
        if grad is None:
            continue
        if node.creator is None:
            node.grad = grad if node.grad is None else node.grad + grad
            continue
        parent_grads = node.creator.backward(grad)
        for parent, parent_grad in zip(node.creator.inputs, parent_grads):
            if parent_grad is None or not parent.requires_grad:
                continue
            if parent_grad.shape != parent.dims:
                raise ShapeError(f"{type(node.creator).__name__} produced a gradient "
                                 f"of dims {parent_grad.shape} for an input of dims {parent.dims}")
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + parent_grad
            else:
                grads[key] = parent_grad

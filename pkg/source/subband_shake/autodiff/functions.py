##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
Differentiable operations: the elementwise and structural helpers the
graph needs, plus every layer primitive used by the two architectures.

All convolutions use stride 1 and zero "same" padding. For even kernel
sizes the extra pad row/column goes on the high-index side.

"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.fft

from subband_shake import (DegenerateError, LabelError, ParameterError,
                           ShapeError)
from subband_shake.autodiff.tensor import Function, Phase, Tensor

logger = logging.getLogger(__name__)


def _unbroadcast(grad: np.ndarray, dims: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to *dims*."""
    while grad.ndim > len(dims):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(dims):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ----------------------------------------------------------------------------
# structural helpers
# ----------------------------------------------------------------------------

class Add(Function):
    def forward(self, a, b):
        return a + b

    def backward(self, grad):
        a, b = self.inputs
        return _unbroadcast(grad, a.dims), _unbroadcast(grad, b.dims)


class Multiply(Function):
    def forward(self, a, b):
        return a * b

    def backward(self, grad):
        a, b = self.inputs
        return (_unbroadcast(grad * b.data, a.dims),
                _unbroadcast(grad * a.data, b.dims))


class Total(Function):
    def forward(self, a):
        return np.asarray(a.sum())

    def backward(self, grad):
        return (np.broadcast_to(grad, self.inputs[0].dims).copy(),)


class Reshape(Function):
    def forward(self, a, dims=None):
        return a.reshape(dims)

    def backward(self, grad):
        return (grad.reshape(self.inputs[0].dims),)


class Take(Function):
    def forward(self, a, index=None):
        self.index = index
        return np.array(a[index])

    def backward(self, grad):
        full = np.zeros(self.inputs[0].dims)
        np.add.at(full, self.index, grad)
        return (full,)


class Concat(Function):
    def forward(self, *arrays, axis=0):
        self.axis = axis
        self.splits = np.cumsum([a.shape[axis] for a in arrays])[:-1]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        return tuple(np.split(grad, self.splits, axis=self.axis))


def add(a: Tensor, b: Tensor) -> Tensor:
    return Add.apply(a, b)


def multiply(a: Tensor, b: Tensor) -> Tensor:
    return Multiply.apply(a, b)


def total(a: Tensor) -> Tensor:
    """Sum of every element, as a scalar tensor."""
    return Total.apply(a)


def reshape(a: Tensor, dims: Sequence[int]) -> Tensor:
    return Reshape.apply(a, dims=tuple(dims))


def take(a: Tensor, index) -> Tensor:
    """Differentiable numpy-style indexing."""
    return Take.apply(a, index=index)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ParameterError("concat needs at least one tensor")
    return Concat.apply(*tensors, axis=axis)


def flatten(a: Tensor) -> Tensor:
    """Flatten every axis but the first."""
    return reshape(a, (a.dims[0], -1))


# ----------------------------------------------------------------------------
# convolution
# ----------------------------------------------------------------------------

@dataclass
class ConvParams:
    '''Weights [out_ch, in_ch, H, W] and bias [out_ch] of a convolution.'''
    weights: Tensor
    bias: Tensor

    def __post_init__(self):
        if self.weights.ndim != 4 or min(self.weights.dims) < 1:
            raise ShapeError(f"convolution weights need 4 positive dims, got {self.weights.dims}")
        if self.bias.dims != (self.weights.dims[0],):
            raise ShapeError(f"convolution bias dims {self.bias.dims} do not match "
                             f"{self.weights.dims[0]} output channels")

    @property
    def out_ch(self) -> int:
        return self.weights.dims[0]

    @property
    def in_ch(self) -> int:
        return self.weights.dims[1]

    @property
    def kernel(self) -> Tuple[int, int]:
        return self.weights.dims[2], self.weights.dims[3]


def same_padding(size: int) -> Tuple[int, int]:
    """Zero padding (low, high) keeping a stride-1 axis length for a kernel of *size*."""
    low = (size - 1) // 2
    return low, size - 1 - low


class Conv2d(Function):
    # The filters span most of the 257 spectral bins, so the width axis is
    # correlated in the frequency domain. Only the few kernel rows are looped
    # over, each as one batched matmul per frequency. Spectra are held as
    # [freq, channel, row, batch] so that a run of rows is a free reshape.

    def forward(self, x, w, b):
        out_ch, in_ch, kh, kw = w.shape
        batch, _, height, width = x.shape
        self.pads = same_padding(kh), same_padding(kw)
        xp = np.pad(x, ((0, 0), (0, 0), self.pads[0], self.pads[1]))
        # covering the padded width leaves the W output columns free of wrap-around
        self.n = scipy.fft.next_fast_len(xp.shape[-1], real=True)

        self.x_f = np.ascontiguousarray(scipy.fft.rfft(xp, n=self.n, axis=-1).transpose(3, 1, 2, 0))
        w_f = scipy.fft.rfft(w, n=self.n, axis=-1)
        freqs = self.x_f.shape[0]

        out_f = np.zeros((freqs, out_ch, height * batch), dtype=complex)
        for i in range(kh):
            rows = self.x_f[:, :, i:i + height, :].reshape(freqs, in_ch, height * batch)
            out_f += np.conj(w_f[:, :, i, :]).transpose(2, 0, 1) @ rows

        out = scipy.fft.irfft(out_f, n=self.n, axis=0)[:width]
        out = out.reshape(width, out_ch, height, batch).transpose(3, 1, 2, 0)
        return out + b[None, :, None, None]

    def backward(self, grad):
        x, w, _ = (t.data for t in self.inputs)
        out_ch, in_ch, kh, kw = w.shape
        batch, _, height, width = x.shape
        freqs = self.x_f.shape[0]

        grad_f = scipy.fft.rfft(grad, n=self.n, axis=-1).transpose(3, 1, 2, 0).reshape(
            freqs, out_ch, height * batch)
        w_f = scipy.fft.rfft(w, n=self.n, axis=-1)

        gw_f = np.empty((freqs, out_ch, in_ch, kh), dtype=complex)
        gxp_f = np.zeros((freqs, in_ch, height + kh - 1, batch), dtype=complex)
        for i in range(kh):
            rows = self.x_f[:, :, i:i + height, :].reshape(freqs, in_ch, height * batch)
            gw_f[..., i] = np.conj(grad_f) @ rows.transpose(0, 2, 1)
            gxp_f[:, :, i:i + height, :] += (w_f[:, :, i, :].transpose(2, 1, 0) @ grad_f).reshape(
                freqs, in_ch, height, batch)

        gw = scipy.fft.irfft(gw_f, n=self.n, axis=0)[:kw].transpose(1, 2, 3, 0)
        gxp = scipy.fft.irfft(gxp_f, n=self.n, axis=0)[:width + kw - 1].transpose(3, 1, 2, 0)
        (top, _), (left, _) = self.pads
        gx = gxp[:, :, top:top + height, left:left + width]
        return np.ascontiguousarray(gx), np.ascontiguousarray(gw), grad.sum(axis=(0, 2, 3))


def conv2d(x: Tensor, params: ConvParams, padding: str = "same") -> Tensor:
    """
    Stride-1 2D convolution with zero same-padding.

    :param x: input of dims [B, C, H, W].
    :param params: the weights and bias.
    :param padding: only "same" is supported.

    :raises ShapeError: if the input channel count is not the weights' in_ch.

    """
    if padding != "same":
        raise ParameterError(f"unsupported padding '{padding}', only 'same' is available")
    if x.ndim != 4:
        raise ShapeError(f"conv2d expects input dims [B, C, H, W], got {x.dims}")
    if x.dims[1] != params.in_ch:
        raise ShapeError(f"conv2d input has {x.dims[1]} channels but the filters "
                         f"expect {params.in_ch}")
    return Conv2d.apply(x, params.weights, params.bias)


# ----------------------------------------------------------------------------
# batch normalisation
# ----------------------------------------------------------------------------

@dataclass
class BatchNormState:
    '''Learnable scale/shift and running statistics of one batch norm layer.'''
    gamma: Tensor
    beta_shift: Tensor
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    epsilon: float = 1e-5

    @classmethod
    def create(cls, channels: int, momentum: float = 0.1, epsilon: float = 1e-5):
        return cls(gamma=Tensor(np.ones(channels), requires_grad=True),
                   beta_shift=Tensor(np.zeros(channels), requires_grad=True),
                   running_mean=np.zeros(channels),
                   running_var=np.ones(channels),
                   momentum=momentum, epsilon=epsilon)

    def __post_init__(self):
        if not 0 < self.momentum <= 1:
            raise ParameterError(f"batch norm momentum must be in (0, 1], got {self.momentum}")
        if self.epsilon <= 0:
            raise ParameterError(f"batch norm epsilon must be positive, got {self.epsilon}")

    @property
    def channels(self) -> int:
        return self.gamma.dims[0]


class BatchNorm2d(Function):
    def forward(self, x, gamma, beta, mean=None, var=None, epsilon=None):
        self.inv_std = 1.0 / np.sqrt(var + epsilon)
        self.x_hat = (x - mean[None, :, None, None]) * self.inv_std[None, :, None, None]
        return gamma[None, :, None, None] * self.x_hat + beta[None, :, None, None]

    def backward(self, grad):
        gamma = self.inputs[1].data
        x_hat = self.x_hat
        g_gamma = (grad * x_hat).sum(axis=(0, 2, 3))
        g_beta = grad.sum(axis=(0, 2, 3))
        g_xhat = grad * gamma[None, :, None, None]
        inv_std = self.inv_std[None, :, None, None]
        if self.training:
            count = grad.shape[0] * grad.shape[2] * grad.shape[3]
            g_x = inv_std / count * (
                count * g_xhat
                - g_xhat.sum(axis=(0, 2, 3), keepdims=True)
                - x_hat * (g_xhat * x_hat).sum(axis=(0, 2, 3), keepdims=True))
        else:
            g_x = g_xhat * inv_std
        return g_x, g_gamma, g_beta


def batchnorm2d(x: Tensor, state: BatchNormState, phase: Phase) -> Tensor:
    """
    Batch normalisation over (B, H, W) per channel.

    In the train phase the batch statistics normalise the input and the
    running statistics move by an exponential moving average (the running
    variance uses the unbiased estimate). The eval phase uses the running
    statistics only.

    :raises DegenerateError: in the train phase when B*H*W < 2.

    """
    if x.ndim != 4 or x.dims[1] != state.channels:
        raise ShapeError(f"batchnorm2d over {state.channels} channels got input dims {x.dims}")
    func = BatchNorm2d(x, state.gamma, state.beta_shift)
    if phase is Phase.TRAIN:
        count = x.dims[0] * x.dims[2] * x.dims[3]
        if count < 2:
            raise DegenerateError(f"batch norm needs at least 2 values per channel "
                                  f"in the train phase, got B*H*W = {count}")
        mean = x.data.mean(axis=(0, 2, 3))
        var = x.data.var(axis=(0, 2, 3))
        m = state.momentum
        state.running_mean = (1 - m) * state.running_mean + m * mean
        state.running_var = (1 - m) * state.running_var + m * var * count / (count - 1)
        func.training = True
    else:
        mean, var = state.running_mean, state.running_var
        func.training = False
    out = func.forward(x.data, state.gamma.data, state.beta_shift.data,
                       mean=mean, var=var, epsilon=state.epsilon)
    requires_grad = x.requires_grad or state.gamma.requires_grad or state.beta_shift.requires_grad
    return Tensor(out, requires_grad=requires_grad, creator=func if requires_grad else None)


# ----------------------------------------------------------------------------
# activations, affine, dropout
# ----------------------------------------------------------------------------

class Relu(Function):
    def forward(self, x):
        self.mask = x > 0
        return np.where(self.mask, x, 0.0)

    def backward(self, grad):
        return (grad * self.mask,)


def relu(x: Tensor) -> Tensor:
    """Elementwise max(0, x); the subgradient at 0 is 0."""
    return Relu.apply(x)


class Linear(Function):
    def forward(self, x, w, b=None):
        out = x @ w
        return out if b is None else out + b

    def backward(self, grad):
        x, w = self.inputs[0].data, self.inputs[1].data
        grads = [grad @ w.T, x.T @ grad]
        if len(self.inputs) == 3:
            grads.append(grad.sum(axis=0))
        return grads


def linear(x: Tensor, weights: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """
    Affine map x @ weights + bias.

    :param x: input [B, D].
    :param weights: [D, K].
    :param bias: optional [K].

    """
    if x.ndim != 2 or weights.ndim != 2 or x.dims[1] != weights.dims[0]:
        raise ShapeError(f"linear cannot map input {x.dims} with weights {weights.dims}")
    if bias is None:
        return Linear.apply(x, weights)
    if bias.dims != (weights.dims[1],):
        raise ShapeError(f"linear bias dims {bias.dims} do not match weights {weights.dims}")
    return Linear.apply(x, weights, bias)


def dropout(x: Tensor, p: float, phase: Phase, rng: np.random.Generator) -> Tensor:
    """
    Inverted dropout: survivors are scaled by 1/(1-p) so eval is the identity.

    :raises ParameterError: unless 0 <= p < 1.

    """
    if not 0 <= p < 1:
        raise ParameterError(f"dropout probability must be in [0, 1), got {p}")
    if phase is Phase.EVAL or p == 0:
        return x
    keep = (rng.random(x.dims) >= p) / (1.0 - p)
    return multiply(x, Tensor(keep))


# ----------------------------------------------------------------------------
# pooling
# ----------------------------------------------------------------------------

class SegmentMean(Function):
    def forward(self, x, lengths=None):
        self.lengths = lengths
        self.starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
        return np.stack([x[s:s + n].mean(axis=0) for s, n in zip(self.starts, lengths)])

    def backward(self, grad):
        return (np.repeat(grad / np.asarray(self.lengths)[:, None], self.lengths, axis=0),)


def segment_mean(x: Tensor, lengths: Sequence[int]) -> Tensor:
    """
    Mean over consecutive row segments: rows [T1 + T2 + ..., D] -> [B, D].

    """
    lengths = [int(n) for n in lengths]
    if x.ndim != 2:
        raise ShapeError(f"segment_mean expects [rows, D], got {x.dims}")
    if not lengths or min(lengths) < 1:
        raise DegenerateError(f"cannot pool an empty sequence, lengths {lengths}")
    if sum(lengths) != x.dims[0]:
        raise ShapeError(f"segment lengths sum to {sum(lengths)} but input has {x.dims[0]} rows")
    return SegmentMean.apply(x, lengths=lengths)


def mean_pool_time(x: Tensor) -> Tensor:
    """
    Arithmetic mean over the time axis of a [T, D] sequence.

    :raises DegenerateError: for an empty sequence.

    """
    if x.ndim != 2:
        raise ShapeError(f"mean_pool_time expects [T, D], got {x.dims}")
    if x.dims[0] == 0:
        raise DegenerateError("cannot pool an empty sequence")
    return reshape(segment_mean(x, [x.dims[0]]), (x.dims[1],))


def group_bounds(size: int, groups: int) -> List[Tuple[int, int]]:
    """Contiguous near-equal [start, stop) groups covering range(size)."""
    if not 1 <= groups <= size:
        raise ParameterError(f"cannot split {size} bins into {groups} groups")
    edges = [(g * size) // groups for g in range(groups + 1)]
    return list(zip(edges[:-1], edges[1:]))


class SpectralGroupMean(Function):
    def forward(self, x, bounds=None):
        self.bounds = bounds
        return np.stack([x[:, :, :, lo:hi].mean(axis=(2, 3)) for lo, hi in bounds], axis=2)

    def backward(self, grad):
        x = self.inputs[0]
        out = np.empty(x.dims)
        height = x.dims[2]
        for g, (lo, hi) in enumerate(self.bounds):
            out[:, :, :, lo:hi] = (grad[:, :, g] / (height * (hi - lo)))[:, :, None, None]
        return (out,)


def spectral_group_mean(x: Tensor, groups: int) -> Tensor:
    """
    Average [N, C, H, F] over H and over contiguous groups of the spectral axis.

    :returns: tensor of dims [N, C, groups].

    """
    if x.ndim != 4:
        raise ShapeError(f"spectral_group_mean expects [N, C, H, F], got {x.dims}")
    return SpectralGroupMean.apply(x, bounds=group_bounds(x.dims[3], groups))


# ----------------------------------------------------------------------------
# loss
# ----------------------------------------------------------------------------

class CrossEntropy(Function):
    def forward(self, logits, labels=None):
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        log_probs = shifted - log_norm
        self.probs = np.exp(log_probs)
        self.labels = labels
        rows = np.arange(logits.shape[0])
        return np.asarray(-log_probs[rows, labels].mean())

    def backward(self, grad):
        batch = self.probs.shape[0]
        g = self.probs.copy()
        g[np.arange(batch), self.labels] -= 1.0
        return (g * (float(grad) / batch),)


def cross_entropy_loss(logits: Tensor, labels: Sequence[int]) -> Tensor:
    """
    Mean softmax cross-entropy, stabilised by max subtraction.

    :raises LabelError: for a label outside [0, K).

    """
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy_loss expects logits [B, K], got {logits.dims}")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (logits.dims[0],):
        raise ShapeError(f"{labels.shape[0] if labels.ndim else 0} labels for "
                         f"{logits.dims[0]} rows of logits")
    classes = logits.dims[1]
    bad = labels[(labels < 0) | (labels >= classes)]
    if bad.size:
        raise LabelError(f"label {int(bad[0])} outside [0, {classes})")
    return CrossEntropy.apply(logits, labels=labels)


__all__ = [
    "BatchNormState", "ConvParams", "add", "batchnorm2d", "concat", "conv2d",
    "cross_entropy_loss", "dropout", "flatten", "group_bounds", "linear",
    "mean_pool_time", "multiply", "relu", "reshape", "same_padding",
    "segment_mean", "spectral_group_mean", "take", "total",
]


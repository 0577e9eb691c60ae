##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
Trainable networks built from a :class:`~subband_shake.models.spec.ModelSpec`.

A mini-batch is a stack of spliced frames, [rows, H, F] or [rows, 1, H, F],
utterance-major, with a ``lengths`` vector giving the number of frames of
each utterance. Every frame is treated as a single-channel image.

"""
import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from subband_shake import ConsistencyError, ShapeError
from subband_shake.autodiff import functions as F
from subband_shake.autodiff.tensor import Phase, Tensor
from subband_shake.models.spec import (BlockSpec, LayerKind, LayerSpec, ModelSpec, Pooling, Shortcut,
                                       deep_spec, shallow_spec)
from subband_shake.shake import BlockCoefficients, residual_shake_block
from subband_shake.util import make_rng

logger = logging.getLogger(__name__)

# stream ids under a model seed
INIT_STREAM = 0
SHAKE_STREAM = 1
DROPOUT_STREAM = 2


@dataclass
class ForwardContext:
    '''Per-pass information every layer may need.'''
    phase: Phase
    lengths: Tuple[int, ...]
    dropout_rng: Optional[np.random.Generator] = None


class Module:
    """
    Base class for layers and containers.

    Subclasses register learnable tensors in ``self.params``, running
    statistics in ``self.buffers`` and sub-modules in ``self.children``.

    """
    def __init__(self):
        self.params: Dict[str, Tensor] = OrderedDict()
        # running statistic name -> the object holding it as an attribute
        self.buffers: Dict[str, object] = OrderedDict()
        self.children: Dict[str, "Module"] = OrderedDict()

    def forward(self, x: Tensor, ctx: ForwardContext) -> Tensor:
        raise NotImplementedError(f"forward must be implemented for '{type(self).__name__}'.")

    def __call__(self, x: Tensor, ctx: ForwardContext) -> Tensor:
        return self.forward(x, ctx)

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, tensor in self.params.items():
            yield prefix + name, tensor
        for name, child in self.children.items():
            yield from child.named_parameters(f"{prefix}{name}.")

    def parameters(self) -> List[Tensor]:
        return [t for _, t in self.named_parameters()]

    def state_dict(self, prefix: str = "") -> "OrderedDict[str, np.ndarray]":
        '''Every learnable tensor and running statistic, in a stable order.'''
        state: "OrderedDict[str, np.ndarray]" = OrderedDict()
        for name, tensor in self.params.items():
            state[prefix + name] = tensor.data
        for name, owner in self.buffers.items():
            state[prefix + name] = getattr(owner, name)
        for name, child in self.children.items():
            state.update(child.state_dict(f"{prefix}{name}."))
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray], prefix: str = ""):
        for name, tensor in self.params.items():
            tensor.data = _checked(state, prefix + name, tensor.dims).copy()
        for name, owner in self.buffers.items():
            current = getattr(owner, name)
            setattr(owner, name, _checked(state, prefix + name, current.shape).copy())
        for name, child in self.children.items():
            child.load_state_dict(state, f"{prefix}{name}.")

    def zero_grad(self):
        for tensor in self.parameters():
            tensor.zero_grad()


def _checked(state, key, dims) -> np.ndarray:
    if key not in state:
        raise ConsistencyError(f"state is missing '{key}'")
    value = np.asarray(state[key], dtype=np.float64)
    if value.shape != tuple(dims):
        raise ConsistencyError(f"state '{key}' has dims {value.shape}, the model expects {tuple(dims)}")
    return value


def _he_normal(rng: np.random.Generator, dims, fan_in: int) -> Tensor:
    return Tensor(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=dims), requires_grad=True)


# ----------------------------------------------------------------------------
# layers
# ----------------------------------------------------------------------------

class Conv2d(Module):
    def __init__(self, in_ch: int, out_ch: int, kernel: Tuple[int, int], rng: np.random.Generator,
                 bias: bool = True):
        super().__init__()
        fan_in = in_ch * kernel[0] * kernel[1]
        self.params["weight"] = _he_normal(rng, (out_ch, in_ch) + tuple(kernel), fan_in)
        if bias:
            self.params["bias"] = Tensor(np.zeros(out_ch), requires_grad=True)
        self._zero_bias = Tensor(np.zeros(out_ch))

    def forward(self, x, ctx):
        bias = self.params.get("bias", self._zero_bias)
        return F.conv2d(x, F.ConvParams(self.params["weight"], bias))


class BatchNorm2d(Module):
    def __init__(self, channels: int):
        super().__init__()
        self.state = F.BatchNormState.create(channels)
        self.params["gamma"] = self.state.gamma
        self.params["beta_shift"] = self.state.beta_shift
        self.buffers["running_mean"] = self.state
        self.buffers["running_var"] = self.state

    def forward(self, x, ctx):
        return F.batchnorm2d(x, self.state, ctx.phase)


class ReLU(Module):
    def forward(self, x, ctx):
        return F.relu(x)


class Linear(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, bias: bool = True):
        super().__init__()
        self.params["weight"] = _he_normal(rng, (in_dim, out_dim), in_dim)
        if bias:
            self.params["bias"] = Tensor(np.zeros(out_dim), requires_grad=True)

    def forward(self, x, ctx):
        return F.linear(x, self.params["weight"], self.params.get("bias"))


class Dropout(Module):
    def __init__(self, p: float):
        super().__init__()
        self.p = p

    def forward(self, x, ctx):
        return F.dropout(x, self.p, ctx.phase, ctx.dropout_rng)


class Sequential(Module):
    def __init__(self, layers: Sequence[Module]):
        super().__init__()
        for i, layer in enumerate(layers):
            self.children[str(i)] = layer

    def forward(self, x, ctx):
        for layer in self.children.values():
            x = layer(x, ctx)
        return x


def make_layers(specs: Sequence[LayerSpec], in_dim: int, rng: np.random.Generator) -> Tuple[List[Module], int]:
    """
    Instantiate a layer list.

    :returns: the modules and the channel count (or width) they output.

    """
    layers: List[Module] = []
    for spec in specs:
        if spec.kind is LayerKind.CONV:
            layers.append(Conv2d(in_dim, spec.channels, spec.kernel, rng, bias=spec.bias))
            in_dim = spec.channels
        elif spec.kind is LayerKind.BATCHNORM:
            layers.append(BatchNorm2d(in_dim))
        elif spec.kind is LayerKind.RELU:
            layers.append(ReLU())
        elif spec.kind is LayerKind.DROPOUT:
            layers.append(Dropout(spec.p))
        else:
            layers.append(Linear(in_dim, spec.channels, rng, bias=spec.bias))
            in_dim = spec.channels
    return layers, in_dim


# ----------------------------------------------------------------------------
# blocks and model
# ----------------------------------------------------------------------------

class ResidualShakeBlock(Module):
    """
    A shortcut plus N residual branches merged by :func:`~subband_shake.shake.residual_shake_block`.

    Coefficients are redrawn from the block's own stream on every train-phase
    pass. Setting ``frozen`` pins them, e.g. for gradient checks.

    """
    def __init__(self, spec: BlockSpec, granularity, normalize_unshaken: bool,
                 init_rng: np.random.Generator, shake_rng: np.random.Generator):
        super().__init__()
        self.spec = spec
        self.granularity = granularity
        self.normalize_unshaken = normalize_unshaken
        self.rng = shake_rng
        self.frozen: Optional[BlockCoefficients] = None
        for n in range(spec.branch_count):
            layers, _ = make_layers(spec.branch.layers, spec.in_channels, init_rng)
            self.children[f"branch{n}"] = Sequential(layers)
        if spec.shortcut is Shortcut.PROJECTION:
            self.children["shortcut"] = Conv2d(spec.in_channels, spec.out_channels, (1, 1), init_rng)

    @property
    def branches(self) -> List[Module]:
        return [self.children[f"branch{n}"] for n in range(self.spec.branch_count)]

    def forward(self, x, ctx):
        outputs = [branch(x, ctx) for branch in self.branches]
        shortcut = self.children["shortcut"](x, ctx) if "shortcut" in self.children else x
        if self.frozen is not None:
            coeffs = self.frozen
        elif ctx.phase is Phase.TRAIN:
            coeffs = BlockCoefficients.draw(self.spec.shake_mode, self.granularity, len(ctx.lengths),
                                            ctx.lengths, self.spec.branch_count, self.rng, ctx.phase)
        else:
            coeffs = None
        out = residual_shake_block(shortcut, outputs, self.spec.shake_mode, coeffs, ctx.phase,
                                   normalize_unshaken=self.normalize_unshaken)
        return F.relu(out) if self.spec.relu_after else out


class Head(Module):
    '''Pool the frame feature maps of each utterance and classify.'''

    def __init__(self, spec: ModelSpec, rng: np.random.Generator):
        super().__init__()
        self.pooling = spec.head.pooling
        self.groups = spec.head.groups
        layers, _ = make_layers(spec.head.layers, spec.pooled_width, rng)
        self.children["classifier"] = Sequential(layers)

    def pool(self, x: Tensor, lengths: Sequence[int]) -> Tensor:
        if self.pooling is Pooling.FLATTEN:
            frames = F.flatten(x)
        else:
            frames = F.flatten(F.spectral_group_mean(x, self.groups))
        return F.segment_mean(frames, lengths)

    def forward(self, x, ctx):
        return self.children["classifier"](self.pool(x, ctx.lengths), ctx)


class Model(Module):
    """
    A built network.

    :param spec: the architecture.
    :param seed: seeds the weight init, the shake streams (one per block) and the dropout stream.

    """
    def __init__(self, spec: ModelSpec, seed: int = 0):
        super().__init__()
        self.spec = spec
        self.seed = seed
        init_rng = make_rng(seed, INIT_STREAM)

        layers, channels = make_layers(spec.prelim, 1, init_rng)
        self.children["prelim"] = Sequential(layers)
        self.blocks: List[ResidualShakeBlock] = []
        for stage in spec.stages:
            blocks = []
            for block_spec in stage.blocks:
                block = ResidualShakeBlock(block_spec, spec.granularity, spec.normalize_unshaken,
                                           init_rng, make_rng(seed, SHAKE_STREAM, len(self.blocks)))
                self.blocks.append(block)
                blocks.append(block)
            self.children[stage.name] = Sequential(blocks)
        self.children["head"] = Head(spec, init_rng)
        self.dropout_rng = make_rng(seed, DROPOUT_STREAM)

    @property
    def stage_names(self) -> List[str]:
        return list(self.children)

    def features(self, frames: Tensor, ctx: ForwardContext) -> Tensor:
        '''The feature maps entering the head, [rows, C, H, F].'''
        x = frames
        if x.ndim == 3:
            x = F.reshape(x, (x.dims[0], 1) + x.dims[1:])
        if x.ndim != 4 or x.dims[1:] != (1, self.spec.context, self.spec.bins):
            raise ShapeError(f"model '{self.spec.name}' expects frames of 1x{self.spec.context}x"
                             f"{self.spec.bins}, got dims {frames.dims}")
        if sum(ctx.lengths) != x.dims[0]:
            raise ShapeError(f"lengths {ctx.lengths} do not cover {x.dims[0]} frames")
        for name in self.stage_names[:-1]:
            x = self.children[name](x, ctx)
        return x

    def forward(self, frames: Tensor, ctx: ForwardContext) -> Tensor:
        return self.children["head"](self.features(frames, ctx), ctx)

    def logits(self, frames, lengths: Sequence[int], phase: Phase) -> Tensor:
        """
        Class scores [B, K] for a stack of frames.

        :param frames: [rows, H, F] or [rows, 1, H, F] as a tensor or array.
        :param lengths: frames per utterance.
        :param phase: train or eval.

        """
        if not isinstance(frames, Tensor):
            frames = Tensor(frames)
        ctx = ForwardContext(phase, tuple(int(n) for n in lengths), self.dropout_rng)
        return self.forward(frames, ctx)

    def predict(self, frames, lengths: Sequence[int]) -> np.ndarray:
        '''Eval-phase class indices, one per utterance.'''
        return np.argmax(self.logits(frames, lengths, Phase.EVAL).data, axis=1)

    def freeze_coefficients(self, coeffs: Optional[Sequence[BlockCoefficients]]):
        '''Pin (or with None, release) the shake coefficients of every block.'''
        for i, block in enumerate(self.blocks):
            block.frozen = None if coeffs is None else coeffs[i]


def build_model(spec: ModelSpec, seed: int = 0) -> Model:
    model = Model(spec, seed)
    logger.debug(f"built {spec.name} model, mode {spec.shake_mode}, {len(model.parameters())} parameter tensors")
    return model


def build_shallow(mode, seed: int = 0, **geometry) -> Model:
    '''The single-block network; see :func:`~subband_shake.models.spec.shallow_spec`.'''
    return build_model(shallow_spec(mode, **geometry), seed)


def build_deep(mode, seed: int = 0, **geometry) -> Model:
    '''The three-stage network; see :func:`~subband_shake.models.spec.deep_spec`.'''
    return build_model(deep_spec(mode, **geometry), seed)


# model name -> builder(mode, seed, **geometry)
MODEL_BUILDERS: Dict[str, Callable[..., Model]] = {
    "shallow": build_shallow,
    "deep": build_deep,
}

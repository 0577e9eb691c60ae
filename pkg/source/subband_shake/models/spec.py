##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
Declarative descriptions of the shake-residual architectures.

A :class:`ModelSpec` is plain data. :func:`~subband_shake.models.network.build_model`
turns it into a trainable network, and
:func:`~subband_shake.models.summary.count_parameters` can count it.

"""
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence, Tuple

from subband_shake import ConsistencyError, ParameterError
from subband_shake.constants import CLASS_COUNT, CONTEXT, SPECTRAL_BINS
from subband_shake.shake import Granularity, ShakeMode, parse_enum


class LayerKind(Enum):
    CONV = "conv"
    BATCHNORM = "bn"
    RELU = "relu"
    DROPOUT = "dropout"
    LINEAR = "linear"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class LayerSpec:
    """
    One layer. Only the fields relevant to its kind are used.

    :param kind: the layer kind.
    :param channels: output channels of a conv, or output width of a linear.
    :param kernel: (H, W) of a conv.
    :param p: dropout probability.
    :param bias: whether a conv or linear carries a bias.

    """
    kind: LayerKind
    channels: int = 0
    kernel: Tuple[int, int] = (1, 1)
    p: float = 0.0
    bias: bool = True

    def describe(self) -> str:
        if self.kind is LayerKind.CONV:
            return f"Conv2d({self.channels},{self.kernel[0]},{self.kernel[1]})"
        if self.kind is LayerKind.BATCHNORM:
            return "BatchNorm2d"
        if self.kind is LayerKind.RELU:
            return "ReLU"
        if self.kind is LayerKind.DROPOUT:
            return f"Dropout({self.p})"
        return f"Linear({self.channels})" + ("" if self.bias else ", no bias")


def conv(channels: int, kernel: Sequence[int], bias: bool = True) -> LayerSpec:
    return LayerSpec(LayerKind.CONV, channels=channels, kernel=(int(kernel[0]), int(kernel[1])), bias=bias)


def batchnorm() -> LayerSpec:
    return LayerSpec(LayerKind.BATCHNORM)


def relu() -> LayerSpec:
    return LayerSpec(LayerKind.RELU)


def dropout(p: float) -> LayerSpec:
    return LayerSpec(LayerKind.DROPOUT, p=p)


def linear(width: int, bias: bool = True) -> LayerSpec:
    return LayerSpec(LayerKind.LINEAR, channels=width, bias=bias)


@dataclass(frozen=True)
class BranchSpec:
    '''The layer list shared by every residual branch of a block.'''
    layers: Tuple[LayerSpec, ...]

    @classmethod
    def conv_bn_relu_conv_bn(cls, channels: int, first_kernel, second_kernel) -> "BranchSpec":
        return cls((conv(channels, first_kernel), batchnorm(), relu(), conv(channels, second_kernel), batchnorm()))

    @property
    def out_channels(self) -> int:
        return [layer.channels for layer in self.layers if layer.kind is LayerKind.CONV][-1]


class Shortcut(Enum):
    IDENTITY = "identity"
    PROJECTION = "projection"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class BlockSpec:
    """
    One residual block: a shortcut plus *branch_count* copies of *branch*.

    The shortcut is a 1x1 projection conv with bias exactly when the channel
    count changes.

    """
    in_channels: int
    branch: BranchSpec
    branch_count: int = 2
    shake_mode: ShakeMode = ShakeMode.NONE
    relu_after: bool = True

    @property
    def out_channels(self) -> int:
        return self.branch.out_channels

    @property
    def shortcut(self) -> Shortcut:
        return Shortcut.PROJECTION if self.in_channels != self.out_channels else Shortcut.IDENTITY


@dataclass(frozen=True)
class StageSpec:
    name: str
    blocks: Tuple[BlockSpec, ...]


class Pooling(Enum):
    '''How the head turns a stack of frame feature maps into one vector per utterance.'''
    # flatten each frame, then average over time
    FLATTEN = "flatten"
    # average over context rows, spectral groups and time
    SPECTRAL_GROUPS = "spectral-groups"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class HeadSpec:
    pooling: Pooling
    layers: Tuple[LayerSpec, ...]
    groups: int = 1


@dataclass(frozen=True)
class ModelSpec:
    """
    A complete architecture.

    :param name: e.g. shallow or deep.
    :param context: rows H of a spliced frame.
    :param bins: spectral bins F of a spliced frame.
    :param prelim: layers applied to the single-channel frame image.
    :param stages: named stages of residual blocks.
    :param head: pooling and classifier.
    :param class_count: number of output classes.
    :param granularity: the shake coefficient granularity.
    :param normalize_unshaken: average rather than sum the unshaken sub-band.

    """
    name: str
    context: int
    bins: int
    prelim: Tuple[LayerSpec, ...]
    stages: Tuple[StageSpec, ...]
    head: HeadSpec
    class_count: int = CLASS_COUNT
    granularity: Granularity = Granularity.FRAME
    normalize_unshaken: bool = False

    def __post_init__(self):
        channels = self.prelim_channels
        for stage in self.stages:
            for i, block in enumerate(stage.blocks):
                if block.in_channels != channels:
                    raise ConsistencyError(f"{stage.name} block {i} expects {block.in_channels} channels "
                                           f"but receives {channels}")
                channels = block.out_channels
        last = [layer for layer in self.head.layers if layer.kind is LayerKind.LINEAR]
        if not last or last[-1].channels != self.class_count:
            raise ConsistencyError(f"the head of '{self.name}' must end in a Linear({self.class_count})")

    @property
    def prelim_channels(self) -> int:
        convs = [layer.channels for layer in self.prelim if layer.kind is LayerKind.CONV]
        return convs[-1] if convs else 1

    @property
    def out_channels(self) -> int:
        if self.stages and self.stages[-1].blocks:
            return self.stages[-1].blocks[-1].out_channels
        return self.prelim_channels

    @property
    def shake_mode(self) -> ShakeMode:
        modes = {block.shake_mode for stage in self.stages for block in stage.blocks}
        return modes.pop() if len(modes) == 1 else ShakeMode.NONE

    @property
    def pooled_width(self) -> int:
        '''Width of the per-utterance vector entering the first head layer.'''
        if self.head.pooling is Pooling.FLATTEN:
            return self.out_channels * self.context * self.bins
        return self.out_channels * self.head.groups

    def with_mode(self, mode) -> "ModelSpec":
        '''The same architecture with every block shaken by *mode*.'''
        mode = parse_enum(ShakeMode, mode)
        stages = tuple(StageSpec(s.name, tuple(replace(b, shake_mode=mode) for b in s.blocks))
                       for s in self.stages)
        return replace(self, stages=stages)


def shallow_spec(mode=ShakeMode.NONE, granularity=Granularity.FRAME, normalize_unshaken: bool = False,
                 context: int = CONTEXT, bins: int = SPECTRAL_BINS, channels: int = 4,
                 prelim_kernel=(2, 16), branch_kernels=((2, 64), (4, 128)),
                 hidden: Sequence[int] = (256, 256), dropouts: Sequence[float] = (0.5, 0.25),
                 class_count: int = CLASS_COUNT) -> ModelSpec:
    """
    The single-block network: a prelim conv with BN and ReLU, one
    two-branch residual block, ReLU, flatten, temporal mean pooling and a
    dropout/linear classifier.

    The keyword geometry defaults to the full-size network; smaller values
    give a cheap model of the same shape for tests.

    """
    if len(hidden) != len(dropouts):
        raise ParameterError(f"{len(hidden)} hidden layers but {len(dropouts)} dropout rates")
    block = BlockSpec(channels, BranchSpec.conv_bn_relu_conv_bn(channels, *branch_kernels),
                      shake_mode=parse_enum(ShakeMode, mode))
    head = []
    for width, p in zip(hidden, dropouts):
        head += [dropout(p), linear(width), relu()]
    head.append(linear(class_count))
    return ModelSpec(name="shallow", context=context, bins=bins,
                     prelim=(conv(channels, prelim_kernel), batchnorm(), relu()),
                     stages=(StageSpec("res", (block, )), ),
                     head=HeadSpec(Pooling.FLATTEN, tuple(head)),
                     class_count=class_count, granularity=parse_enum(Granularity, granularity),
                     normalize_unshaken=normalize_unshaken)


DEEP_LADDER = (("res-8", 8, 3), ("res-16", 16, 1), ("res-32", 32, 1))


def deep_spec(mode=ShakeMode.NONE, granularity=Granularity.FRAME, normalize_unshaken: bool = False,
              context: int = CONTEXT, bins: int = SPECTRAL_BINS, prelim_channels: int = 4,
              kernel=(2, 16), ladder: Sequence[Tuple[str, int, int]] = DEEP_LADDER,
              groups: int = 8, class_count: int = CLASS_COUNT) -> ModelSpec:
    """
    The three-stage network: a prelim conv, stages of two-branch blocks
    on a widening channel ladder, a global average over time, context rows
    and *groups* contiguous spectral groups, and a bias-free affine layer.

    :param ladder: (stage name, channels, block count) per stage.

    """
    mode = parse_enum(ShakeMode, mode)
    stages = []
    channels = prelim_channels
    for name, width, count in ladder:
        blocks = []
        for _ in range(count):
            blocks.append(BlockSpec(channels, BranchSpec.conv_bn_relu_conv_bn(width, kernel, kernel),
                                    shake_mode=mode))
            channels = width
        stages.append(StageSpec(name, tuple(blocks)))
    return ModelSpec(name="deep", context=context, bins=bins,
                     prelim=(conv(prelim_channels, kernel), relu()),
                     stages=tuple(stages),
                     head=HeadSpec(Pooling.SPECTRAL_GROUPS, (linear(class_count, bias=False), ), groups=groups),
                     class_count=class_count, granularity=parse_enum(Granularity, granularity),
                     normalize_unshaken=normalize_unshaken)



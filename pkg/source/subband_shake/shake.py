##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
Shake-Shake aggregation with spectral sub-band variants.

In the train phase every branch output is scaled by a forward coefficient
alpha, while the gradient flowing back into the branch is scaled by an
independently drawn beta. The eval phase replaces both by their
expectation 1/N.

The sub-band variants split the spectral axis at its midpoint and shake
only the upper band, only the lower band, or both bands with independent
draws. A band which is not shaken merges its branches by a plain sum.

Feature maps store the spectral axis last with index 0 the lowest
frequency, so the lower band always comes first along that axis.

"""
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from subband_shake import BandTooNarrowError, ParameterError, ShapeError
from subband_shake.autodiff.container import FLOAT64, save_tensor
from subband_shake.autodiff.functions import add, concat, multiply, take
from subband_shake.autodiff.tensor import Function, Phase, Tensor

logger = logging.getLogger(__name__)


class ShakeMode(Enum):
    '''Which part of the spectral axis is shaken.'''
    NONE = "none"
    FULL = "full"
    UPPER = "upper"
    LOWER = "lower"
    BOTH = "both"

    def __str__(self):
        return self.value

    @property
    def bands(self) -> Tuple[str, ...]:
        ''':returns: the coefficient sets this mode draws.'''
        return {
            ShakeMode.NONE: (),
            ShakeMode.FULL: ("full", ),
            ShakeMode.UPPER: ("upper", ),
            ShakeMode.LOWER: ("lower", ),
            ShakeMode.BOTH: ("upper", "lower"),
        }[self]


class Granularity(Enum):
    '''The unit at which independent coefficients are drawn.'''
    BATCH = "batch"
    SAMPLE = "sample"
    FRAME = "frame"

    def __str__(self):
        return self.value


def parse_enum(enum_cls, value):
    """
    Convert a string (or an existing member) into a member of *enum_cls*.

    :raises ParameterError: for an unknown value.

    """
    if isinstance(value, enum_cls):
        return value
    try:
        return enum_cls(str(value).lower())
    except ValueError:
        choices = ", ".join(m.value for m in enum_cls)
        raise ParameterError(f"unknown {enum_cls.__name__.lower()} '{value}', expected one of {choices}")


# ----------------------------------------------------------------------------
# coefficients
# ----------------------------------------------------------------------------

def sample_simplex(n: int, rng: np.random.Generator) -> np.ndarray:
    """
    One draw from the uniform distribution on the (n-1)-simplex.

    Normalises n independent unit-rate exponential draws. For n=2 this is
    (u, 1-u) with u uniform on [0, 1].

    :raises ParameterError: if n < 1.

    """
    return sample_simplex_rows(1, n, rng)[0]


def sample_simplex_rows(cells: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """*cells* independent simplex draws as an array [cells, n]."""
    if n < 1:
        raise ParameterError(f"simplex needs at least one coordinate, got n={n}")
    draws = rng.standard_exponential((cells, n))
    return draws / draws.sum(axis=1, keepdims=True)


@dataclass
class ShakeCoefficients:
    """
    Forward (alphas) and backward (betas) coefficients for one shaken band.

    :param alphas: [cells, N] forward coefficients.
    :param betas: [cells, N] backward coefficients, drawn independently.
    :param granularity: the unit one cell covers.
    :param lengths: frames per sample, which maps sample cells onto stacked frame rows.

    """
    alphas: np.ndarray
    betas: np.ndarray
    granularity: Granularity
    lengths: Tuple[int, ...]

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=np.float64)
        self.betas = np.asarray(self.betas, dtype=np.float64)
        if self.alphas.ndim != 2 or self.alphas.shape != self.betas.shape:
            raise ShapeError(f"alphas {self.alphas.shape} and betas {self.betas.shape} "
                             f"must both be [cells, N]")
        self.lengths = tuple(int(n) for n in self.lengths)

    @property
    def branch_count(self) -> int:
        return self.alphas.shape[1]

    @property
    def cells(self) -> int:
        return self.alphas.shape[0]

    def per_row(self, rows: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        Expand the cells to one coefficient row per stacked frame.

        :returns: alphas and betas, each [rows, N].

        """
        if self.cells == 1:
            return (np.repeat(self.alphas, rows, axis=0), np.repeat(self.betas, rows, axis=0))
        if self.granularity is Granularity.SAMPLE:
            if sum(self.lengths) != rows or len(self.lengths) != self.cells:
                raise ShapeError(f"{self.cells} sample cells with lengths {self.lengths} "
                                 f"do not cover {rows} rows")
            return (np.repeat(self.alphas, self.lengths, axis=0),
                    np.repeat(self.betas, self.lengths, axis=0))
        if self.cells != rows:
            raise ShapeError(f"{self.cells} {self.granularity} cells do not cover {rows} rows")
        return self.alphas, self.betas

    def dump(self, fpath: Union[str, Path]):
        """Save [alphas, betas] as one [2, cells, N] container for debugging."""
        save_tensor(fpath, np.stack([self.alphas, self.betas]), dtype_code=FLOAT64)

    @classmethod
    def expectation(cls, n: int, lengths: Sequence[int] = (1, )) -> "ShakeCoefficients":
        '''The eval-phase coefficients: a single 1/N cell for both passes.'''
        cell = np.full((1, n), 1.0 / n)
        return cls(cell, cell.copy(), Granularity.BATCH, tuple(lengths))


def _frame_counts(batch: int, frames: Union[int, Sequence[int]]) -> Tuple[int, ...]:
    if isinstance(frames, (int, np.integer)):
        lengths = (int(frames), ) * batch
    else:
        lengths = tuple(int(t) for t in frames)
        if len(lengths) != batch:
            raise ParameterError(f"{len(lengths)} frame counts given for a batch of {batch}")
    if batch < 1 or not lengths or min(lengths) < 1:
        raise ParameterError(f"batch and frame counts must be at least 1, got B={batch}, T={frames}")
    return lengths


def make_shake_coefficients(granularity: Union[Granularity, str], batch: int,
                            frames: Union[int, Sequence[int]], n: int,
                            rng: np.random.Generator, phase: Phase) -> ShakeCoefficients:
    """
    Draw the coefficients of one shaken band for one forward pass.

    :param granularity: batch gives one cell, sample one per utterance, frame one per frame.
    :param batch: number of utterances B.
    :param frames: a frame count shared by every utterance, or one count per utterance.
    :param n: number of branches N.
    :param rng: the block's coefficient stream.
    :param phase: the eval phase always gives the constant 1/N cell.

    """
    granularity = parse_enum(Granularity, granularity)
    lengths = _frame_counts(batch, frames)
    if n < 1:
        raise ParameterError(f"need at least one branch, got n={n}")
    if phase is Phase.EVAL:
        return ShakeCoefficients.expectation(n, lengths)

    cells = {
        Granularity.BATCH: 1,
        Granularity.SAMPLE: batch,
        Granularity.FRAME: sum(lengths),
    }[granularity]
    alphas = sample_simplex_rows(cells, n, rng)
    betas = sample_simplex_rows(cells, n, rng)
    return ShakeCoefficients(alphas, betas, granularity, lengths)


@dataclass
class BlockCoefficients:
    '''The coefficient sets one block needs; unused bands stay None.'''
    full: Optional[ShakeCoefficients] = None
    upper: Optional[ShakeCoefficients] = None
    lower: Optional[ShakeCoefficients] = None

    @classmethod
    def draw(cls, mode: ShakeMode, granularity, batch, frames, n, rng, phase) -> "BlockCoefficients":
        # bands in a fixed order so a seeded stream always gives the same draws
        coeffs = cls()
        for band in mode.bands:
            setattr(coeffs, band, make_shake_coefficients(granularity, batch, frames, n, rng, phase))
        return coeffs


# ----------------------------------------------------------------------------
# sub-bands
# ----------------------------------------------------------------------------

@dataclass
class SubbandPair:
    '''The two halves of a tensor along its spectral axis.'''
    upper: Tensor
    lower: Tensor
    source_dims: Tuple[int, ...]
    spectral_axis: int

    def merge(self) -> Tensor:
        '''Reassemble the source layout, lower band first.'''
        return concat([self.lower, self.upper], axis=self.spectral_axis)


def _band_index(ndim: int, axis: int, start: int, stop: int):
    index = [slice(None)] * ndim
    index[axis] = slice(start, stop)
    return tuple(index)


def split_subbands(x: Tensor, spectral_axis: int = -1) -> SubbandPair:
    """
    Split at the midpoint of the spectral axis.

    The lower band holds indices [0, F//2) and the upper band [F//2, F),
    so an odd F gives the extra bin to the upper band.

    :raises BandTooNarrowError: if F < 2.

    """
    axis = spectral_axis % x.ndim
    size = x.dims[axis]
    if size < 2:
        raise BandTooNarrowError(f"cannot split a spectral axis of {size} bin(s) into sub-bands")
    mid = size // 2
    return SubbandPair(upper=take(x, _band_index(x.ndim, axis, mid, size)),
                       lower=take(x, _band_index(x.ndim, axis, 0, mid)),
                       source_dims=x.dims, spectral_axis=axis)


# ----------------------------------------------------------------------------
# aggregation
# ----------------------------------------------------------------------------

class ShakeMix(Function):
    """Forward sum of alpha-scaled branches; backward routes beta-scaled gradients."""

    def forward(self, *branches, alphas=None, betas=None):
        trailing = (1, ) * (branches[0].ndim - 1)
        self.betas = [betas[:, i].reshape((-1, ) + trailing) for i in range(len(branches))]
        # fixed accumulation order, so equal inputs give bitwise equal outputs
        out = alphas[:, 0].reshape((-1, ) + trailing) * branches[0]
        for i in range(1, len(branches)):
            out = out + alphas[:, i].reshape((-1, ) + trailing) * branches[i]
        return out

    def backward(self, grad):
        return tuple(beta * grad for beta in self.betas)


def _check_branches(branches: Sequence[Tensor]):
    if not branches:
        raise ParameterError("shake needs at least one branch")
    dims = branches[0].dims
    for i, branch in enumerate(branches[1:], start=1):
        if branch.dims != dims:
            raise ShapeError(f"branch {i} has dims {branch.dims} but branch 0 has {dims}")


def shake_aggregate(branches: Sequence[Tensor], coeffs: Optional[ShakeCoefficients],
                    phase: Phase) -> Tensor:
    """
    The coefficient-weighted branch sum.

    The first axis of every branch is the stacked frame (row) axis which the
    coefficient cells are expanded over.

    :param branches: N tensors of identical dims.
    :param coeffs: the band's coefficients, ignored in the eval phase.
    :param phase: train uses alphas forward and betas backward; eval uses 1/N.

    """
    _check_branches(branches)
    n = len(branches)
    if phase is Phase.EVAL or coeffs is None:
        if phase is Phase.TRAIN:
            raise ParameterError("train-phase shaking needs coefficients")
        coeffs = ShakeCoefficients.expectation(n)
    if coeffs.branch_count != n:
        raise ShapeError(f"coefficients for {coeffs.branch_count} branches given to {n} branches")
    alphas, betas = coeffs.per_row(branches[0].dims[0])
    return ShakeMix.apply(*branches, alphas=alphas, betas=betas)


def _branch_sum(branches: Sequence[Tensor], normalize: bool) -> Tensor:
    out = branches[0]
    for branch in branches[1:]:
        out = add(out, branch)
    if normalize:
        out = multiply(out, Tensor(1.0 / len(branches)))
    return out


def residual_shake_block(x: Tensor, branch_outputs: Sequence[Tensor], mode: ShakeMode,
                         coeffs: Optional[BlockCoefficients], phase: Phase,
                         spectral_axis: int = -1, normalize_unshaken: bool = False) -> Tensor:
    """
    Merge a shortcut and its residual branches under one of the shake modes.

    ============  ==========================================================
    none          x + sum of branches
    full          x + shake(branches)
    upper         x + [sum of lower halves | shake(upper halves)]
    lower         x + [shake(lower halves) | sum of upper halves]
    both          x + [shake(lower halves) | shake(upper halves)], independent draws
    ============  ==========================================================

    :param x: the shortcut output.
    :param branch_outputs: the N branch outputs, each with the dims of *x*.
    :param mode: the shake mode.
    :param coeffs: the coefficient sets the mode needs; may be None in the eval phase.
    :param phase: train or eval.
    :param spectral_axis: the frequency axis of the feature maps.
    :param normalize_unshaken: average instead of sum the bands which are not shaken.

    :raises BandTooNarrowError: for a sub-band mode on a spectral axis of fewer than 2 bins.

    """
    mode = parse_enum(ShakeMode, mode)
    _check_branches(branch_outputs)
    if branch_outputs[0].dims != x.dims:
        raise ShapeError(f"branch dims {branch_outputs[0].dims} do not match shortcut dims {x.dims}")
    coeffs = coeffs or BlockCoefficients()

    if mode is ShakeMode.NONE:
        merged = _branch_sum(branch_outputs, normalize=False)
    elif mode is ShakeMode.FULL:
        merged = shake_aggregate(branch_outputs, coeffs.full, phase)
    else:
        pairs: List[SubbandPair] = [split_subbands(b, spectral_axis) for b in branch_outputs]
        uppers = [p.upper for p in pairs]
        lowers = [p.lower for p in pairs]
        if mode in (ShakeMode.UPPER, ShakeMode.BOTH):
            upper = shake_aggregate(uppers, coeffs.upper, phase)
        else:
            upper = _branch_sum(uppers, normalize_unshaken)
        if mode in (ShakeMode.LOWER, ShakeMode.BOTH):
            lower = shake_aggregate(lowers, coeffs.lower, phase)
        else:
            lower = _branch_sum(lowers, normalize_unshaken)
        merged = SubbandPair(upper, lower, x.dims, pairs[0].spectral_axis).merge()

    return add(x, merged)

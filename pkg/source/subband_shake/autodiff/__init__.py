##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
A minimal dense-tensor and reverse-mode differentiation core.

"""
from subband_shake.autodiff.tensor import Function, Phase, Tensor, backward
from subband_shake.autodiff.functions import (
    BatchNormState, ConvParams, add, batchnorm2d, concat, conv2d,
    cross_entropy_loss, dropout, flatten, linear, mean_pool_time, multiply,
    relu, reshape, segment_mean, spectral_group_mean, take, total)
from subband_shake.autodiff.optim import Adam, AdamState, adam_step

__all__ = [
    "Adam", "AdamState", "BatchNormState", "ConvParams", "Function", "Phase",
    "Tensor", "adam_step", "add", "backward", "batchnorm2d", "concat",
    "conv2d", "cross_entropy_loss", "dropout", "flatten", "linear",
    "mean_pool_time", "multiply", "relu", "reshape", "segment_mean",
    "spectral_group_mean", "take", "total",
]

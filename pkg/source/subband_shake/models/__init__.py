##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
The two shake-residual architectures: declarative specs, trainable networks,
checkpoints and parameter accounting.

"""
from subband_shake.models.network import MODEL_BUILDERS, Model, build_deep, build_model, build_shallow
from subband_shake.models.spec import ModelSpec, deep_spec, shallow_spec
from subband_shake.models.summary import ParameterCount, count_parameters, model_summary

__all__ = [
    "MODEL_BUILDERS", "Model", "ModelSpec", "ParameterCount", "build_deep", "build_model",
    "build_shallow", "count_parameters", "deep_spec", "model_summary", "shallow_spec",
]

"""
This module allows any application to import the experiment building
blocks independent of the location of the files using
`from subband_shake.api import ...`.
"""

from subband_shake.autodiff import Adam, Phase, Tensor, backward, cross_entropy_loss
from subband_shake.data.manifest import UtteranceRecord, read_manifest, write_manifest
from subband_shake.data.partition import make_folds, partition_actors, partition_summary
from subband_shake.data.synth import SynthSpec, generate_synthetic_corpus
from subband_shake.experiment_config import ExperimentConfig
from subband_shake.features import extract_features, load_features, read_wav
from subband_shake.models import build_deep, build_shallow, count_parameters, model_summary
from subband_shake.shake import (Granularity, ShakeMode, make_shake_coefficients, residual_shake_block,
                                 sample_simplex, shake_aggregate, split_subbands)
from subband_shake.steps import run_mp, step
from subband_shake.steps.featurize import featurize
from subband_shake.steps.stats import stats
from subband_shake.steps.sweep import sweep
from subband_shake.steps.synth_data import synth_data
from subband_shake.steps.train import train_runs
from subband_shake.train.evaluation import early_stop_select, sweep_patience, unweighted_accuracy
from subband_shake.train.loop import HyperParams, TrainReport, train
from subband_shake.train.stats import comparison_table, paired_t_test_one_sided
from subband_shake.util import TimerLogger, get_workspace, make_rng

__all__ = [
    "Adam",
    "backward",
    "build_deep",
    "build_shallow",
    "comparison_table",
    "count_parameters",
    "cross_entropy_loss",
    "early_stop_select",
    "ExperimentConfig",
    "extract_features",
    "featurize",
    "generate_synthetic_corpus",
    "get_workspace",
    "Granularity",
    "HyperParams",
    "load_features",
    "make_folds",
    "make_rng",
    "make_shake_coefficients",
    "model_summary",
    "paired_t_test_one_sided",
    "partition_actors",
    "partition_summary",
    "Phase",
    "read_manifest",
    "read_wav",
    "residual_shake_block",
    "run_mp",
    "sample_simplex",
    "shake_aggregate",
    "ShakeMode",
    "split_subbands",
    "stats",
    "step",
    "sweep",
    "sweep_patience",
    "synth_data",
    "SynthSpec",
    "Tensor",
    "TimerLogger",
    "train",
    "train_runs",
    "TrainReport",
    "unweighted_accuracy",
    "UtteranceRecord",
    "write_manifest",
]

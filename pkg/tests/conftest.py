##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
Fixtures and helpers for testing.
"""
import logging
from functools import partial
from pathlib import Path

import numpy as np
from pytest import fixture

from subband_shake.data.synth import SynthSpec, generate_synthetic_corpus
from subband_shake.experiment_config import ExperimentConfig
from subband_shake.models.network import MODEL_BUILDERS, build_deep, build_shallow
from subband_shake.train.loop import EpochRecord, TrainReport

# down-scaled geometries with the full-size layer structure
TINY_SHALLOW = dict(context=4, bins=8, channels=2, prelim_kernel=(2, 3),
                    branch_kernels=((2, 3), (2, 3)), hidden=(6, ), dropouts=(0.0, ))
TINY_DEEP = dict(context=4, bins=8, prelim_channels=2, kernel=(2, 3),
                 ladder=(("res-a", 2, 1), ("res-b", 3, 1)), groups=2)

# small enough to train on real 16x257 frames in a test
FAST_SHALLOW = dict(channels=2, prelim_kernel=(1, 3), branch_kernels=((1, 3), (1, 3)),
                    hidden=(8, ), dropouts=(0.25, ))
FAST_DEEP = dict(prelim_channels=2, kernel=(1, 3), ladder=(("res-a", 2, 1), ("res-b", 3, 1)))


@fixture(autouse=True)
def clean_log_handlers():
    """Restore the package logger handlers after each test."""
    shake_logger = logging.getLogger("subband_shake")
    before = list(shake_logger.handlers)
    level = shake_logger.level
    yield
    shake_logger.handlers[:] = before
    shake_logger.setLevel(level)


@fixture
def rng():
    return np.random.default_rng(1234)


@fixture
def tiny_shallow():
    return partial(build_shallow, **TINY_SHALLOW)


@fixture
def tiny_deep():
    return partial(build_deep, **TINY_DEEP)


@fixture
def fast_builders(monkeypatch):
    """Swap the full-size architectures for fast ones of the same structure."""
    monkeypatch.setitem(MODEL_BUILDERS, "shallow", partial(build_shallow, **FAST_SHALLOW))
    monkeypatch.setitem(MODEL_BUILDERS, "deep", partial(build_deep, **FAST_DEEP))
    return MODEL_BUILDERS


@fixture
def small_synth_spec():
    return SynthSpec(actor_count=4, per_class=2, min_duration=0.3, max_duration=0.6, seed=3)


@fixture
def small_corpus(tmp_path, small_synth_spec) -> Path:
    """A generated corpus, returning the manifest path."""
    corpus = tmp_path / 'corpus'
    generate_synthetic_corpus(small_synth_spec, corpus)
    return corpus / 'manifest.csv'


@fixture
def config(tmp_path) -> ExperimentConfig:
    return ExperimentConfig(name='test', workspace=tmp_path / 'runs', manifest=tmp_path / 'corpus' / 'manifest.csv',
                            actors=4, per_class=2, epochs=2, batch_size=8, seeds=[0], seed=0)


def make_frames(rng, lengths, context=4, bins=8) -> np.ndarray:
    """Random stacked frames for utterances of the given lengths."""
    return rng.normal(size=(sum(lengths), context, bins))


def write_runs(config, name, curves):
    """
    Write one report per run under a run name.

    :param curves: (fold, seed) -> (validation UA curve, train UA curve).

    """
    for (fold, seed), (valid, train) in curves.items():
        report = TrainReport(epochs=[EpochRecord(epoch=e + 1, train_loss=1.0, train_ua=t, valid_ua=v)
                                     for e, (v, t) in enumerate(zip(valid, train))])
        report.write(config.job_dir(fold, seed, name=name) / 'report.jsonl')

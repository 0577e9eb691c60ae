##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
Train one model per (fold, seed).

Every run writes ``report.jsonl``, ``best.ckpt`` and ``config.txt`` to
``<workspace>/<name>/fold<k>/seed<s>/``. The actor partition behind the
folds is written once, to ``<workspace>/<name>/partition.txt``.

"""
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Dict, List, Sequence, Union

from subband_shake import ConfigError, MissingFeatureError, ShakeException
from subband_shake.constants import CHECKPOINT_NAME, CONFIG_ECHO, PARTITION_NAME, REPORT_NAME
from subband_shake.data.manifest import UtteranceRecord, read_manifest
from subband_shake.data.partition import Fold, make_folds, partition_actors, partition_summary, write_partition
from subband_shake.experiment_config import ExperimentConfig
from subband_shake.logtools import EXPERIMENT, make_logger
from subband_shake.metrics import send_metric
from subband_shake.models.network import MODEL_BUILDERS, Model
from subband_shake.steps import check_for_errors, run_mp, step
from subband_shake.steps.featurize import feature_location
from subband_shake.train.evaluation import RunKey
from subband_shake.train.loop import HyperParams, TrainReport, load_examples, train
from subband_shake.util import TimerLogger, derive_seed, make_rng

logger = make_logger(EXPERIMENT)

# the data order stream of a run, apart from the model's own streams
DATA_STREAM = 3


@dataclass
class TrainJob():
    fold: Fold
    seed: int

    @property
    def key(self) -> RunKey:
        return self.fold.index, self.seed


def build_for(config: ExperimentConfig, fold: int, seed: int) -> Model:
    '''The freshly initialised model of one run.'''
    builder = MODEL_BUILDERS[config.model]
    return builder(config.mode, seed=derive_seed(config.root_seed, fold, seed),
                   granularity=config.granularity, normalize_unshaken=config.normalize_unshaken)


def check_features(config: ExperimentConfig, records: Sequence[UtteranceRecord]):
    """
    :raises MissingFeatureError: naming the first utterance without a feature file.

    """
    for record in records:
        location = feature_location(config, record)
        if not location.exists():
            raise MissingFeatureError(record.utterance_id, location)


def train_one(job: TrainJob, config: ExperimentConfig) -> Union[TrainReport, Exception]:
    """
    Train, report and checkpoint a single run, returning rather than raising any error.

    """
    fold, seed = job.key
    out_dir = config.job_dir(fold, seed)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        config.echo(out_dir / CONFIG_ECHO)

        train_set = load_examples(job.fold.train, [feature_location(config, r) for r in job.fold.train])
        valid_set = load_examples(job.fold.validation,
                                  [feature_location(config, r) for r in job.fold.validation])
        hp = HyperParams(lr=config.lr, batch_size=config.batch_size, max_epochs=config.epochs,
                         mode=config.mode, granularity=config.granularity, seed=seed)

        with TimerLogger(f"training fold {fold} seed {seed}") as timer:
            report = train(build_for(config, fold, seed), train_set, valid_set, hp,
                           rng=make_rng(config.root_seed, fold, seed, DATA_STREAM),
                           checkpoint=out_dir / CHECKPOINT_NAME)
        report.config.update({'fold': fold, 'root_seed': config.root_seed, 'name': config.name})
        report.write(out_dir / REPORT_NAME)
    except (ShakeException, OSError) as err:
        logger.error(f"fold {fold} seed {seed} failed: {err}")
        return err

    send_metric('train', f"fold{fold}/seed{seed}", timer.taken)
    best = max(report.valid_ua)
    logger.info(f"fold {fold} seed {seed}: best validation UA {best:.2f} at epoch "
                f"{report.valid_ua.index(best) + 1} of {len(report)}")
    return report


@step
def train_runs(config: ExperimentConfig, records: Sequence[UtteranceRecord] = ()) -> Dict[RunKey, TrainReport]:
    """
    Partition the actors, then train every selected fold with every seed.

    :param config:
        Model, shake mode, hyperparameters, folds, seeds and job count.
    :param records:
        The manifest rows, default read from ``config.manifest_path``.
    :returns:
        (fold, seed) -> report.

    """
    if not records:
        records = read_manifest(config.require(config.manifest_path, "manifest"))
    check_features(config, records)

    partition = partition_actors(records, k=config.folds, seed=config.root_seed)
    write_partition(config.run_dir / PARTITION_NAME, partition)
    logger.info("actor partition\n" + partition_summary(partition, records))
    folds = make_folds(partition, records)
    selected = config.run_folds or list(range(config.folds))
    jobs = [TrainJob(folds[k], seed) for k in selected for seed in config.seeds]
    logger.info(f"training {len(jobs)} {config.model} models, mode {config.mode}, "
                f"granularity {config.granularity}")

    results = run_mp(jobs, partial(train_one, config=config), config.jobs)
    check_for_errors(results, caller_label="training")
    return {job.key: report for job, report in zip(jobs, results)}


def run_paths(config: ExperimentConfig, name: str) -> Dict[RunKey, Path]:
    '''(fold, seed) -> report file of every run found under a run name.'''
    paths = {}
    for fpath in sorted((config.workspace / name).glob(f"fold*/seed*/{REPORT_NAME}")):
        try:
            key = int(fpath.parent.parent.name[len("fold"):]), int(fpath.parent.name[len("seed"):])
        except ValueError:
            logger.warning(f"ignoring {fpath}, not in a fold<k>/seed<s> folder")
            continue
        paths[key] = fpath
    return paths


def load_reports(config: ExperimentConfig, name: str) -> Dict[RunKey, TrainReport]:
    """
    Read every report of a run name.

    :raises ConfigError: if there are none.

    """
    paths = run_paths(config, name)
    if not paths:
        raise ConfigError(f"no {REPORT_NAME} files under {config.workspace / name}")
    return {key: TrainReport.read(fpath) for key, fpath in paths.items()}


def report_names(config: ExperimentConfig) -> List[str]:
    '''The run names compared by sweep and stats, default this config's own.'''
    return list(config.models) or [config.name]

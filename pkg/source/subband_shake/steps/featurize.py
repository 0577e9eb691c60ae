##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
Turn every manifest row's WAV into a feature file.

Existing feature files are kept unless the config says ``force``. A bad
WAV either stops the step (``fail_fast``) or is reported and skipped.

"""
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import List, Optional, Sequence, Union

from subband_shake import DegenerateError, ShapeError
from subband_shake.autodiff.container import load_tensor
from subband_shake.constants import CONTEXT, SPECTRAL_BINS
from subband_shake.data.manifest import UtteranceRecord, read_manifest, resolve_feature_path, wav_path
from subband_shake.experiment_config import ExperimentConfig
from subband_shake.features import extract_features, feature_path, read_wav, save_features
from subband_shake.logtools import EXPERIMENT, make_logger
from subband_shake.metrics import send_metric
from subband_shake.steps import run_mp, step
from subband_shake.util import by_type, log_or_dot, log_or_dot_finish

logger = make_logger(EXPERIMENT)


def feature_location(config: ExperimentConfig, record: UtteranceRecord) -> Path:
    '''The feature file of *record*: under ``feature_dir`` if set, else the manifest's own column.'''
    if config.feature_dir:
        return feature_path(config.feature_dir, record.utterance_id)
    return resolve_feature_path(config.manifest_path, record)


@dataclass
class FeaturizeJob():
    utterance_id: str
    wav: Path
    target: Path


@dataclass
class FeaturizeResult():
    utterance_id: str
    frames: int
    skipped: bool = False


class FeaturizeError(OSError):
    """A WAV which could not be turned into features."""

    def __init__(self, utterance_id: str, cause: Exception):
        super().__init__(f"utterance '{utterance_id}': {cause}")
        self.utterance_id = utterance_id
        self.cause = cause

    def __reduce__(self):
        return self.__class__, (self.utterance_id, self.cause)


@dataclass
class FeaturizeSummary():
    done: List[FeaturizeResult] = field(default_factory=list)
    failed: List[FeaturizeError] = field(default_factory=list)

    @property
    def skipped(self) -> int:
        return sum(1 for r in self.done if r.skipped)

    def shape_line(self) -> str:
        '''e.g. ``13×16×257``, or ``9-40×16×257`` when lengths vary.'''
        counts = [r.frames for r in self.done]
        if not counts:
            frames = "T"
        elif min(counts) == max(counts):
            frames = str(counts[0])
        else:
            frames = f"{min(counts)}-{max(counts)}"
        return f"{frames}×{CONTEXT}×{SPECTRAL_BINS}"


def featurize_one(job: FeaturizeJob, force: bool = False) -> Union[FeaturizeResult, FeaturizeError]:
    """
    Featurize a single utterance, returning rather than raising any error.

    """
    if job.target.exists() and not force:
        try:
            return FeaturizeResult(job.utterance_id, load_tensor(job.target).shape[0], skipped=True)
        except Exception as err:
            logger.warning(f"rewriting unreadable {job.target}: {err}")

    try:
        features = extract_features(read_wav(job.wav))
        job.target.parent.mkdir(parents=True, exist_ok=True)
        save_features(job.target, features)
    except (OSError, DegenerateError, ShapeError) as err:
        return FeaturizeError(job.utterance_id, err)

    log_or_dot(logger, f"featurized {job.utterance_id}: {features.shape_line()}")
    return FeaturizeResult(job.utterance_id, features.count)


def make_jobs(config: ExperimentConfig, records: Sequence[UtteranceRecord]) -> List[FeaturizeJob]:
    return [FeaturizeJob(r.utterance_id, wav_path(config.manifest_path, r), feature_location(config, r))
            for r in records]


@step
def featurize(config: ExperimentConfig, records: Optional[Sequence[UtteranceRecord]] = None) -> FeaturizeSummary:
    """
    Write one feature file per manifest row.

    :param config:
        The manifest, feature folder, job count and the ``force`` and ``fail_fast`` switches.
    :param records:
        The rows to featurize, default the whole manifest.
    :raises FeaturizeError:
        For the first bad utterance, in ``fail_fast`` mode.

    """
    manifest = config.require(config.manifest_path, "manifest")
    if records is None:
        records = read_manifest(manifest)

    jobs = make_jobs(config, records)
    logger.info(f"featurizing {len(jobs)} utterances")

    summary = FeaturizeSummary()
    if config.fail_fast and config.jobs == 1:
        # one at a time so nothing runs after the first failure
        for job in jobs:
            result = featurize_one(job, force=config.force)
            if isinstance(result, FeaturizeError):
                raise result
            summary.done.append(result)
    else:
        results = run_mp(jobs, partial(featurize_one, force=config.force), config.jobs)
        summary.failed = list(by_type(results, FeaturizeError))
        if summary.failed and config.fail_fast:
            raise summary.failed[0]
        summary.done = list(by_type(results, FeaturizeResult))
    log_or_dot_finish(logger)

    for error in summary.failed:
        logger.warning(f"skipped {error}")

    send_metric('featurize', 'utterances', len(summary.done))
    send_metric('featurize', 'skipped', summary.skipped)
    send_metric('featurize', 'failed', len(summary.failed))
    logger.info(f"{len(summary.done) - summary.skipped} featurized, {summary.skipped} already present, "
                f"{len(summary.failed)} failed; shape {summary.shape_line()}")
    return summary


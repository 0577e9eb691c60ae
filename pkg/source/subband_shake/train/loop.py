##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
The training loop and its per-epoch report.

"""
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from subband_shake import ConsistencyError, ParameterError
from subband_shake.autodiff import Adam, Phase, backward, cross_entropy_loss
from subband_shake.constants import BATCH_SIZE, LEARNING_RATE, MAX_EPOCHS
from subband_shake.data.manifest import UtteranceRecord
from subband_shake.features import load_features
from subband_shake.models.checkpoint import save_checkpoint
from subband_shake.models.network import Model
from subband_shake.shake import Granularity, ShakeMode, parse_enum
from subband_shake.train.evaluation import unweighted_accuracy
from subband_shake.util import Timer

logger = logging.getLogger(__name__)


@dataclass
class HyperParams:
    lr: float = LEARNING_RATE
    batch_size: int = BATCH_SIZE
    max_epochs: int = MAX_EPOCHS
    mode: ShakeMode = ShakeMode.NONE
    granularity: Granularity = Granularity.FRAME
    seed: int = 0

    def __post_init__(self):
        self.mode = parse_enum(ShakeMode, self.mode)
        self.granularity = parse_enum(Granularity, self.granularity)
        if self.batch_size < 1:
            raise ParameterError(f"batch size must be at least 1, got {self.batch_size}")
        if self.max_epochs < 1:
            raise ParameterError(f"max epochs must be at least 1, got {self.max_epochs}")
        if self.lr <= 0:
            raise ParameterError(f"learning rate must be positive, got {self.lr}")

    def snapshot(self) -> Dict[str, Any]:
        return {**asdict(self), 'mode': str(self.mode), 'granularity': str(self.granularity)}


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_ua: float
    valid_ua: float


@dataclass
class TrainReport:
    """
    Per-epoch curves of one training run, with what produced them.

    Serialised as line-delimited JSON: one header line holding the config
    snapshot, optimiser step count and wall-clock, then one line per epoch.

    """
    epochs: List[EpochRecord] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)
    wall_clock: float = 0.0
    steps: int = 0

    @property
    def train_ua(self) -> List[float]:
        return [e.train_ua for e in self.epochs]

    @property
    def valid_ua(self) -> List[float]:
        return [e.valid_ua for e in self.epochs]

    @property
    def losses(self) -> List[float]:
        return [e.train_loss for e in self.epochs]

    def __len__(self):
        return len(self.epochs)

    def write(self, fpath: Union[str, Path]):
        fpath = Path(fpath)
        fpath.parent.mkdir(parents=True, exist_ok=True)
        with open(fpath, 'wt') as outfile:
            header = {'config': self.config, 'wall_clock': self.wall_clock, 'steps': self.steps}
            outfile.write(json.dumps(header) + "\n")
            for record in self.epochs:
                outfile.write(json.dumps(asdict(record)) + "\n")

    @classmethod
    def read(cls, fpath: Union[str, Path]) -> "TrainReport":
        fpath = Path(fpath)
        report = cls()
        with open(fpath, 'rt') as infile:
            for line_no, line in enumerate(infile, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    if 'epoch' in record:
                        report.epochs.append(EpochRecord(**record))
                    else:
                        report.config = record.get('config', {})
                        report.wall_clock = record.get('wall_clock', 0.0)
                        report.steps = record.get('steps', 0)
                except (json.JSONDecodeError, TypeError) as err:
                    raise ConsistencyError(f"{fpath} line {line_no}: {err}") from err
        return report


# ----------------------------------------------------------------------------
# data
# ----------------------------------------------------------------------------

@dataclass
class Example:
    utterance_id: str
    frames: np.ndarray
    label: int


def load_examples(records: Sequence[UtteranceRecord], paths: Sequence[Path]) -> List[Example]:
    """
    Read the features of every record.

    :raises MissingFeatureError: naming the first utterance without a feature file.

    """
    return [Example(r.utterance_id, load_features(p, r.utterance_id), r.label_index)
            for r, p in zip(records, paths)]


def make_batches(count: int, batch_size: int, rng: Optional[np.random.Generator]) -> List[np.ndarray]:
    '''Index batches over *count* examples, shuffled when an rng is given.'''
    order = rng.permutation(count) if rng is not None else np.arange(count)
    return [order[i:i + batch_size] for i in range(0, count, batch_size)]


def stack(examples: Sequence[Example]):
    '''Frames stacked utterance-major, per-utterance lengths and labels.'''
    frames = np.concatenate([e.frames for e in examples], axis=0)
    lengths = [e.frames.shape[0] for e in examples]
    labels = [e.label for e in examples]
    return frames, lengths, labels


def predict(model: Model, examples: Sequence[Example], batch_size: int) -> np.ndarray:
    '''Eval-phase predictions in example order.'''
    preds = []
    for index in make_batches(len(examples), batch_size, None):
        frames, lengths, _ = stack([examples[i] for i in index])
        preds.append(model.predict(frames, lengths))
    return np.concatenate(preds) if preds else np.zeros(0, dtype=int)


# ----------------------------------------------------------------------------
# the loop
# ----------------------------------------------------------------------------

def train(model: Model, train_set: Sequence[Example], valid_set: Sequence[Example], hp: HyperParams,
          rng: np.random.Generator, checkpoint: Optional[Union[str, Path]] = None) -> TrainReport:
    """
    Train with Adam on shuffled mini-batches for ``hp.max_epochs`` epochs.

    Train UA is taken from the train-phase predictions made while fitting
    each epoch; validation UA from an eval-phase pass at the end of it.
    The checkpoint, when given, holds the weights of the best validation
    epoch, earliest on ties.

    :param model: a freshly built model.
    :param train_set: the training examples.
    :param valid_set: the validation examples.
    :param hp: hyperparameters.
    :param rng: the data order stream.
    :param checkpoint: where to keep the best-validation weights.

    """
    if not train_set or not valid_set:
        raise ParameterError(f"need training and validation examples, got {len(train_set)} and {len(valid_set)}")

    optimiser = Adam(model.parameters(), lr=hp.lr)
    report = TrainReport(config={**hp.snapshot(), 'model': model.spec.name,
                                 'train_size': len(train_set), 'valid_size': len(valid_set)})
    best_ua = -np.inf
    with Timer() as timer:
        for epoch in range(1, hp.max_epochs + 1):
            loss_sum = 0.0
            preds, truth = [], []
            for index in make_batches(len(train_set), hp.batch_size, rng):
                frames, lengths, labels = stack([train_set[i] for i in index])
                optimiser.zero_grad()
                logits = model.logits(frames, lengths, Phase.TRAIN)
                loss = cross_entropy_loss(logits, labels)
                backward(loss)
                optimiser.step()
                loss_sum += loss.item() * len(index)
                preds.extend(np.argmax(logits.data, axis=1))
                truth.extend(labels)

            record = EpochRecord(epoch=epoch, train_loss=loss_sum / len(train_set),
                                 train_ua=unweighted_accuracy(preds, truth),
                                 valid_ua=unweighted_accuracy(predict(model, valid_set, hp.batch_size),
                                                              [e.label for e in valid_set]))
            report.epochs.append(record)
            logger.debug(f"epoch {epoch}: loss {record.train_loss:.4f}, "
                         f"train UA {record.train_ua:.2f}, valid UA {record.valid_ua:.2f}")

            if record.valid_ua > best_ua:
                best_ua = record.valid_ua
                if checkpoint is not None:
                    save_checkpoint(model, checkpoint, meta={'epoch': epoch, 'valid_ua': record.valid_ua})

    report.wall_clock = timer.taken
    report.steps = optimiser.state.step_count
    return report

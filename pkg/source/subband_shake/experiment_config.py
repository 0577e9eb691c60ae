##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
Contains the :class:`~subband_shake.experiment_config.ExperimentConfig`.

A config is read from a flat ``key = value`` file, ``#`` starts a comment
and lists are comma separated. Every key is also a command line flag of the
same name, with dashes for underscores, and flags win over the file.

"""
import getpass
import logging
import os
import warnings
from datetime import datetime
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

from subband_shake import ConfigError
from subband_shake.constants import (BATCH_SIZE, CONFIG_ECHO, LEARNING_RATE, MANIFEST_NAME, MAX_EPOCHS,
                                     PATIENCES)
from subband_shake.metrics import init_metrics, metrics_summary, send_metric, stop_metrics
from subband_shake.shake import Granularity, ShakeMode
from subband_shake.util import TimerLogger, by_type, get_root_seed, get_workspace

logger = logging.getLogger(__name__)


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ('1', 'true', 'yes', 'on'):
        return True
    if value in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f"'{text}' is not a boolean")


def _list(item: Callable[[str], Any]) -> Callable[[str], List[Any]]:
    def parse(text: str) -> List[Any]:
        return [item(part.strip()) for part in text.split(',') if part.strip()]
    return parse


def _optional(item: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse(text: str):
        return None if text.strip().lower() in ('', 'none') else item(text)
    return parse


def _choice(*choices: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        value = text.strip().lower()
        if value not in choices:
            raise ValueError(f"'{text}' is not one of {', '.join(choices)}")
        return value
    return parse


# key -> (parser, default, help)
FIELDS: Dict[str, Tuple[Callable[[str], Any], Any, str]] = {
    'name': (str, 'experiment', "run name, the folder under the workspace"),
    'workspace': (_optional(Path), None, "root of all runs, default $SUBBAND_SHAKE_WORKSPACE or ./runs"),
    'manifest': (_optional(Path), None, "utterance manifest, default <workspace>/corpus/manifest.csv"),
    'feature_dir': (_optional(Path), None, "feature folder, default the manifest's feature_path column"),
    'model': (_choice('shallow', 'deep'), 'shallow', "architecture"),
    'mode': (_choice(*(m.value for m in ShakeMode)), 'none', "shake mode"),
    'granularity': (_choice(*(g.value for g in Granularity)), 'frame', "shake coefficient granularity"),
    'normalize_unshaken': (_bool, False, "average rather than sum the unshaken sub-band"),
    'lr': (float, LEARNING_RATE, "Adam learning rate"),
    'batch_size': (int, BATCH_SIZE, "utterances per mini-batch"),
    'epochs': (int, MAX_EPOCHS, "epochs per run"),
    'seed': (_optional(int), None, "root seed, default $SUBBAND_SHAKE_SEED or 0"),
    'seeds': (_list(int), [0, 1, 2], "run seeds, one training run per seed and fold"),
    'folds': (int, 4, "number of actor partitions"),
    'run_folds': (_list(int), [], "fold indices to train, default all of them"),
    'patience': (_list(int), list(PATIENCES), "patience values of the sweep"),
    'models': (_list(str), [], "run names compared by sweep-patience and stats"),
    'baseline': (_optional(str), None, "run name the others are highlighted against"),
    'stats_patience': (_optional(int), None, "patience used by stats, default the final epoch"),
    'jobs': (int, 1, "parallel worker processes"),
    'actors': (int, 8, "synthetic actors"),
    'per_class': (int, 20, "synthetic utterances per actor and class"),
    'corpora': (_list(str), ['synth'], "synthetic corpus tags"),
    'noise_level': (float, 0.05, "synthetic noise standard deviation"),
    'force': (_bool, False, "redo work whose output already exists"),
    'fail_fast': (_bool, False, "stop at the first bad utterance instead of reporting them all"),
    'verbose': (_bool, False, "debug messages in the run log"),
}


def read_config_file(fpath: Path) -> Dict[str, str]:
    """
    Read raw ``key = value`` pairs.

    :raises ConfigError: for a malformed line or an unknown key.

    """
    fpath = Path(fpath)
    if not fpath.exists():
        raise ConfigError(f"config file not found: {fpath}")
    values = {}
    for line_no, line in enumerate(fpath.read_text().splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f"{fpath} line {line_no}: expected 'key = value', got '{line}'")
        key, value = (part.strip() for part in line.split('=', 1))
        key = key.replace('-', '_')
        if key not in FIELDS:
            raise ConfigError(f"{fpath} line {line_no}: unknown key '{key}'")
        values[key] = value
    return values


class ExperimentConfig():
    """
    The resolved settings of one experiment command.

    Use it as a context manager around the work: entry creates the run
    folder, opens the run log and starts metrics collection, exit records the
    run metrics and removes the log handler.

    """
    def __init__(self, **values: Any):
        unknown = set(values) - set(FIELDS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for key, (parser, default, _) in FIELDS.items():
            value = values.get(key, default)
            if isinstance(value, str) and parser is not str:
                try:
                    value = parser(value)
                except ValueError as err:
                    raise ConfigError(f"bad value for '{key}': {err}") from err
            setattr(self, key, list(value) if isinstance(value, list) else value)

        if not self.seeds:
            raise ConfigError("the seed list must not be empty")
        for key in ('batch_size', 'epochs', 'jobs', 'actors'):
            if getattr(self, key) < 1:
                raise ConfigError(f"'{key}' must be at least 1, got {getattr(self, key)}")
        if self.folds < 2:
            raise ConfigError(f"'folds' must be at least 2, got {self.folds}")
        if self.lr <= 0:
            raise ConfigError(f"'lr' must be positive, got {self.lr}")
        bad_folds = [k for k in self.run_folds if not 0 <= k < self.folds]
        if bad_folds:
            raise ConfigError(f"fold indices {bad_folds} are outside 0..{self.folds - 1}")

        self.workspace = (self.workspace or get_workspace()).expanduser().resolve()
        self._timer: Optional[TimerLogger] = None
        self._start_time: Optional[datetime] = None

    @classmethod
    def from_sources(cls, config_file: Optional[Path] = None,
                     overrides: Optional[Mapping[str, Any]] = None) -> "ExperimentConfig":
        '''Config file values, overridden by any non-None flag values.'''
        values: Dict[str, Any] = read_config_file(config_file) if config_file else {}
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls(**values)

    def __enter__(self):
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self._init_logging()
        self.echo_to_run()
        init_metrics(metrics_folder=self.metrics_folder)
        self._start_time = datetime.now().replace(microsecond=0)

        self._timer = TimerLogger(f'running {self.name}')
        self._timer.__enter__()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self._timer.__exit__(exc_type, exc_val, exc_tb)
        try:
            self._finalise_metrics()
        finally:
            self._finalise_logging()

    # ------------------------------------------------------------------
    # derived settings
    # ------------------------------------------------------------------

    @property
    def run_dir(self) -> Path:
        ''':returns: the folder of this run, under the workspace.'''
        return self.workspace / self.name

    @property
    def metrics_folder(self) -> Path:
        return self.run_dir / 'metrics'

    @property
    def manifest_path(self) -> Path:
        return self.manifest if self.manifest else self.workspace / 'corpus' / MANIFEST_NAME

    @property
    def root_seed(self) -> int:
        return get_root_seed(self.seed)

    def job_dir(self, fold: int, seed: int, name: Optional[str] = None) -> Path:
        ''':returns: the output folder of one (fold, seed) run.'''
        return self.workspace / (name or self.name) / f'fold{fold}' / f'seed{seed}'

    def require(self, fpath: Path, what: str) -> Path:
        '''Check a referenced path exists.'''
        if not Path(fpath).exists():
            raise ConfigError(f"{what} not found: {fpath}")
        return Path(fpath)

    def values(self) -> Dict[str, Any]:
        return {key: getattr(self, key) for key in FIELDS}

    def echo(self, fpath: Path):
        """
        Write the resolved config back as ``key = value`` text, readable by
        :func:`read_config_file`.

        """
        lines = [f"# resolved config, root seed {self.root_seed}"]
        for key, value in self.values().items():
            if isinstance(value, list):
                value = ", ".join(str(v) for v in value)
            lines.append(f"{key} = {'none' if value is None else value}")
        fpath = Path(fpath)
        fpath.parent.mkdir(parents=True, exist_ok=True)
        fpath.write_text("\n".join(lines) + "\n")

    def echo_to_run(self):
        self.echo(self.run_dir / CONFIG_ECHO)

    # ------------------------------------------------------------------
    # logging and metrics
    # ------------------------------------------------------------------

    def _init_logging(self):
        # a file logger for our run
        log_file_handler = RotatingFileHandler(self.run_dir / 'log.txt', backupCount=5, delay=True)
        log_file_handler.setLevel(logging.DEBUG if self.verbose else logging.INFO)
        log_file_handler.setFormatter(logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s"))
        log_file_handler.doRollover()
        logging.getLogger('subband_shake').addHandler(log_file_handler)

        logger.info(f"{datetime.now()}")
        logger.info(f"run folder is {self.run_dir}")
        logger.debug(f"root seed {self.root_seed}, jobs {self.jobs}")

    def _finalise_logging(self):
        # remove our file logger
        shake_logger = logging.getLogger('subband_shake')
        log_file_handlers = list(by_type(shake_logger.handlers, RotatingFileHandler))
        if len(log_file_handlers) != 1:
            warnings.warn(f'expected to find 1 RotatingFileHandler for removal, found {len(log_file_handlers)}')
        for handler in log_file_handlers:
            shake_logger.removeHandler(handler)
            handler.close()

    def _finalise_metrics(self):
        send_metric('run', 'label', self.name)
        send_metric('run', 'datetime', self._start_time.isoformat())
        send_metric('run', 'time taken', self._timer.taken)
        send_metric('run', 'nodename', os.uname().nodename)
        send_metric('run', 'user', getpass.getuser())
        stop_metrics()
        metrics_summary(metrics_folder=self.metrics_folder)

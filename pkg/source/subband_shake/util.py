##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
Various utility functions live here.

"""

import datetime
import logging
import multiprocessing
import os
import sys
import zlib
from collections import namedtuple
from pathlib import Path
from time import perf_counter
from typing import Callable, Iterable, List, Optional, Sequence, TypeVar, Union

import numpy as np

from subband_shake import ShakeException
from subband_shake.constants import SEED_ENV, WORKSPACE_ENV

logger = logging.getLogger(__name__)

T = TypeVar("T")


def log_or_dot(logger, msg):
    """
    Print a full stop without a newline, except in debug logging where it logs a message.

    """
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug(msg)
    elif logger.isEnabledFor(logging.INFO):
        print('.', end='')
        sys.stdout.flush()


def log_or_dot_finish(logger):
    """
    Complete the row of full stops from :func:`~subband_shake.util.log_or_dot`.

    """
    if logger.isEnabledFor(logging.INFO):
        print('')


HashedFile = namedtuple("HashedFile", ['fpath', 'file_hash'])


def file_checksum(fpath):
    """
    Return a checksum of the given file.

    Deterministic across Python invocations, unlike the builtin hash.

    """
    with open(fpath, "rb") as infile:
        return HashedFile(fpath, zlib.crc32(infile.read()))


def derive_seed(*keys: int) -> int:
    """
    Hash a root seed and any number of indices into an independent 32-bit seed.

    Used to give every utterance, fold, seed and stream its own random
    source, so work can run in any order or in parallel.

    """
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def make_rng(*keys: int) -> np.random.Generator:
    """A numpy random generator seeded from :func:`derive_seed`."""
    return np.random.default_rng(derive_seed(*keys))


class Timer:
    """
    A simple timing context manager.

    """
    def __init__(self) -> None:
        self.start: Optional[float] = None
        self.taken: Optional[float] = None

    def __enter__(self):
        self.start = perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        assert self.start is not None
        self.taken = perf_counter() - self.start


class TimerLogger(Timer):
    """
    A labelled timing context manager which logs the label and the time taken.

    """
    def __init__(self, label, res=0.001):
        super().__init__()
        self.label = label
        self.res = res

    def __enter__(self):
        super().__enter__()
        logger.info(self.label)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        super().__exit__(exc_type, exc_val, exc_tb)

        # don't bother reporting trivial timings
        seconds = int(self.taken / self.res) * self.res
        if seconds >= self.res:

            if seconds > 60:
                td = datetime.timedelta(seconds=int(seconds))
                logger.info(f"{self.label} took {td}")
            else:
                logger.info(f"{self.label} took {seconds:.3f}s")


def by_type(iterable, cls):
    """
    Find all the elements of an iterable which are of a given type.

    """
    return filter(lambda i: isinstance(i, cls), iterable)


def run_mp(items: Sequence, func: Callable[..., T], jobs: int = 1) -> List[T]:
    """
    Process multiple items, in parallel when more than one job is allowed.

    Results come back in item order, so the output does not depend on the
    job count.

    :param items:
        The items to process.
    :param func:
        A picklable function processing a *single* item.
    :param jobs:
        The number of worker processes; 1 runs in this process.

    """
    items = list(items)
    if jobs > 1 and len(items) > 1:
        with multiprocessing.Pool(min(jobs, len(items))) as p:
            return p.map(func, items)
    return [func(i) for i in items]


def check_for_errors(results: Iterable[Union[T, Exception]],
                     caller_label: Optional[str] = None) -> None:
    """
    Check an iterable of results for any exceptions and handle them gracefully.

    Per-item functions return their exception rather than raising it, so one
    bad item does not hide the others. A lone library or i/o error is raised
    as it is, keeping its type for the caller; anything else is gathered into
    one RuntimeError.

    :param results:
        An iterable of results.
    :param caller_label:
        Optional human-friendly name of the caller for logging.
    """
    caller_label = f'during {caller_label}' if caller_label else ''

    exceptions = list(by_type(results, Exception))
    if len(exceptions) == 1 and isinstance(exceptions[0], (ShakeException, OSError)):
        raise exceptions[0]
    if exceptions:
        formatted_errors = "\n\n".join(map(str, exceptions))
        raise RuntimeError(
            f"{formatted_errors}\n\n{len(exceptions)} error(s) found {caller_label}"
        )


def get_workspace() -> Path:
    """
    Read the run workspace from the `SUBBAND_SHAKE_WORKSPACE` environment variable,
    defaulting to ./runs.

    """
    workspace = os.getenv(WORKSPACE_ENV)
    if not workspace:
        workspace = "./runs"

    return Path(workspace)


def get_root_seed(explicit: Optional[int] = None) -> int:
    """
    The root seed: an explicit value wins, then `SUBBAND_SHAKE_SEED`, then 0.

    """
    if explicit is not None:
        return int(explicit)
    env = os.getenv(SEED_ENV)
    if env:
        return int(env)
    return 0

#!/usr/bin/env python3
##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
Shake-shake residual networks with spectral sub-band shaking, for speech
emotion recognition experiments.
"""

import argparse
import sys
from typing import Callable, Dict, List, Optional

from .arguments import ShakeArgumentParser, config_overrides
from .. import ConfigError, ConsistencyError, ShakeException
from ..experiment_config import ExperimentConfig
from ..logtools import SYSTEM, make_logger
from ..models.network import MODEL_BUILDERS
from ..models.summary import model_summary
from ..steps.featurize import featurize
from ..steps.stats import STATS_TEXT, stats
from ..steps.sweep import SWEEP_TEXT, sweep
from ..steps.synth_data import synth_data
from ..steps.train import train_runs

# exit status per failure class, argparse exits with EXIT_USAGE itself
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_IO = 4
EXIT_CONSISTENCY = 5
EXIT_LIBRARY = 10
EXIT_INTERRUPTED = 11


def cmd_synth_data(config: ExperimentConfig):
    with config:
        records = synth_data(config)
    print(f"{len(records)} utterances written to {config.manifest_path}")


def cmd_featurize(config: ExperimentConfig):
    with config:
        summary = featurize(config)
    print(f"{len(summary.done)} feature files ({summary.skipped} already present, "
          f"{len(summary.failed)} failed), shape {summary.shape_line()}")


def cmd_train(config: ExperimentConfig):
    with config:
        reports = train_runs(config)
    print(f"{len(reports)} runs written under {config.run_dir}")


def cmd_sweep(config: ExperimentConfig):
    with config:
        sweep(config)
    print((config.run_dir / SWEEP_TEXT).read_text(), end="")


def cmd_stats(config: ExperimentConfig):
    with config:
        stats(config)
    print((config.run_dir / STATS_TEXT).read_text(), end="")


def cmd_inspect_model(config: ExperimentConfig):
    builder = MODEL_BUILDERS[config.model]
    model = builder(config.mode, seed=config.root_seed, granularity=config.granularity,
                    normalize_unshaken=config.normalize_unshaken)
    print(model_summary(model))


COMMAND_FUNCTIONS: Dict[str, Callable[[ExperimentConfig], None]] = {
    "synth-data": cmd_synth_data,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "sweep-patience": cmd_sweep,
    "stats": cmd_stats,
    "inspect-model": cmd_inspect_model,
}


def exit_code(error: BaseException) -> int:
    """The process exit status for an error escaping a command."""
    if isinstance(error, KeyboardInterrupt):
        return EXIT_INTERRUPTED
    if isinstance(error, ConfigError):
        return EXIT_CONFIG
    if isinstance(error, ConsistencyError):
        return EXIT_CONSISTENCY
    if isinstance(error, OSError):
        return EXIT_IO
    return EXIT_LIBRARY


def make_config(args: argparse.Namespace) -> ExperimentConfig:
    return ExperimentConfig.from_sources(args.config, config_overrides(args))


def main(argv: Optional[List[str]] = None):
    """Main function.

    :param argv: list of command line arguments.  Use sys.argv if not specified.
    """

    if argv is None:
        # Use system argument if none have been provided
        argv = sys.argv[1:]

    parser = ShakeArgumentParser(description=__doc__)
    args = parser.parse_args(argv)

    logger = make_logger(SYSTEM)

    try:
        config = make_config(args)
        COMMAND_FUNCTIONS[args.command](config)
    except KeyboardInterrupt:
        print("error: interrupted by user", file=sys.stderr)
        logger.error("interrupted by user")
        raise SystemExit(EXIT_INTERRUPTED)
    except (ShakeException, OSError, RuntimeError) as error:
        print(f"error: {error}", file=sys.stderr)
        logger.error(str(error))
        raise SystemExit(exit_code(error))


if __name__ == "__main__":

    main()

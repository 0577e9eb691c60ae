##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
Pairwise significance tests between run names.

"""
from typing import Dict

from subband_shake import ParameterError
from subband_shake.experiment_config import ExperimentConfig
from subband_shake.logtools import EXPERIMENT, make_logger
from subband_shake.steps import step
from subband_shake.steps.train import load_reports, report_names
from subband_shake.train.evaluation import RunKey, Selection, early_stop_select, final_epoch_select
from subband_shake.train.stats import ComparisonTable, compare_models, comparison_table

logger = make_logger(EXPERIMENT)

STATS_CSV = "stats.csv"
STATS_TEXT = "stats.txt"


def select_runs(config: ExperimentConfig, name: str) -> Dict[RunKey, Selection]:
    '''Each run's selected epoch: early stopping at ``stats_patience``, else the final epoch.'''
    reports = load_reports(config, name)
    if config.stats_patience is None:
        return {key: final_epoch_select(report) for key, report in reports.items()}
    return {key: early_stop_select(report, config.stats_patience) for key, report in reports.items()}


@step
def stats(config: ExperimentConfig) -> ComparisonTable:
    """
    One-sided paired t-tests of validation UA and gap between every ordered
    pair of run names, over their shared (fold, seed) grid.

    Writes ``stats.csv`` and ``stats.txt`` to the run folder.

    :raises ConsistencyError: if the grids differ.
    :raises DegenerateError: if two compared runs agree exactly, including a run compared with itself.

    """
    names = report_names(config)
    if len(names) < 2:
        raise ParameterError(f"stats needs at least two run names in 'models', got {names}")

    selections = {name: select_runs(config, name) for name in dict.fromkeys(names)}
    for i, name in enumerate(names):
        if name in names[:i]:
            compare_models(selections, name, name)

    table = comparison_table(selections)
    text = table.to_text()
    config.run_dir.mkdir(parents=True, exist_ok=True)
    (config.run_dir / STATS_CSV).write_text(table.to_csv())
    (config.run_dir / STATS_TEXT).write_text(text)
    logger.info(f"comparison of {', '.join(table.models)} written to {config.run_dir}")
    logger.debug("\n" + text)
    return table

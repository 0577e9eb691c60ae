##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
Early-stopping patience sweep over finished training runs.

"""
from typing import List

from subband_shake.experiment_config import ExperimentConfig
from subband_shake.logtools import EXPERIMENT, make_logger
from subband_shake.steps import step
from subband_shake.steps.train import load_reports, report_names
from subband_shake.train.evaluation import SweepResult, gap_trend, sweep_patience

logger = make_logger(EXPERIMENT)

SWEEP_CSV = "sweep.csv"
SWEEP_TEXT = "sweep.txt"


def seed_gap_table(result: SweepResult) -> str:
    '''Mean gap per seed, models by patience, for reading the trend across runs.'''
    out = []
    for seed, by_seed in result.by_seed().items():
        out.append(f"seed {seed}, train - validation UA gap (%)")
        width = max([len("model")] + [len(m) for m in by_seed.models]) + 2
        out.append("model".ljust(width) + "".join(f"{p:>9}" for p in by_seed.patiences))
        for model, values in zip(by_seed.models, by_seed.rows("gap")):
            out.append(model.ljust(width) + "".join(f"{v:9.2f}" for v in values))
        out.append("")
    return "\n".join(out)


def trend_lines(result: SweepResult, baseline: str) -> List[str]:
    '''At the largest patience, how many seeds put each model's gap below the baseline's.'''
    candidates = [m for m in result.models if m != baseline]
    if not candidates:
        return []
    patience = result.patiences[-1]
    by_seed = result.by_seed()
    counts = gap_trend(by_seed, baseline, candidates, patience)
    return [f"{model}: smaller gap than {baseline} at patience {patience} in {n} of {len(by_seed)} seeds"
            for model, n in counts.items()]


@step
def sweep(config: ExperimentConfig) -> SweepResult:
    """
    Sweep the patience list over the reports of every compared run name.

    Writes ``sweep.csv`` and ``sweep.txt`` to the run folder.

    :raises ConsistencyError: if the run names do not share one (fold, seed) grid.

    """
    names = report_names(config)
    result = None
    for name in names:
        model_sweep = sweep_patience(load_reports(config, name), config.patience, model=name)
        result = model_sweep if result is None else result.merge(model_sweep)
    assert result is not None

    baseline = (config.baseline or names[0]) if len(names) > 1 else None
    text = [result.to_text(baseline), seed_gap_table(result)]
    if baseline:
        text += trend_lines(result, baseline)
    text = "\n".join(text).rstrip() + "\n"

    config.run_dir.mkdir(parents=True, exist_ok=True)
    (config.run_dir / SWEEP_CSV).write_text(result.to_csv())
    (config.run_dir / SWEEP_TEXT).write_text(text)
    logger.info(f"patience sweep of {', '.join(names)} written to {config.run_dir}")
    logger.debug("\n" + text)
    return result

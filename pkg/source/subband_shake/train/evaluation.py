##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
Unweighted accuracy, early-stopping selection and the patience sweep.

The sweep is computed after the fact from complete training curves: one
run per (fold, seed) serves every patience value.

"""
import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

from subband_shake import ConsistencyError, DegenerateError, ParameterError, ShapeError

logger = logging.getLogger(__name__)

# (fold, seed)
RunKey = Tuple[int, int]

BETTER_UA = "better_ua"
SMALLER_GAP = "smaller_gap"
PREFERRED = "preferred"


def unweighted_accuracy(preds: Sequence[int], truth: Sequence[int]) -> float:
    """
    Mean per-class recall over the classes present in *truth*, as a percentage.

    :raises ParameterError: for empty input.
    :raises ShapeError: for unequal lengths.

    """
    preds = np.asarray(preds)
    truth = np.asarray(truth)
    if preds.shape != truth.shape:
        raise ShapeError(f"{preds.size} predictions for {truth.size} labels")
    if truth.size == 0:
        raise ParameterError("unweighted accuracy of an empty set is undefined")
    recalls = [np.mean(preds[truth == c] == c) for c in np.unique(truth)]
    return float(100.0 * np.mean(recalls))


@dataclass(frozen=True)
class Selection:
    """
    The epoch a stopping rule picks from one run.

    :param epoch: 1-based selected epoch.
    :param valid_ua: validation UA at that epoch.
    :param gap: train UA minus validation UA at that epoch.
    :param stop_epoch: the 1-based epoch training would have stopped at.
    :param truncated: the curve ended before the rule fired.

    """
    epoch: int
    valid_ua: float
    gap: float
    stop_epoch: int
    truncated: bool = False


def _curves(report) -> Tuple[List[float], List[float]]:
    valid, train = list(report.valid_ua), list(report.train_ua)
    if not valid:
        raise DegenerateError("cannot select an epoch from an empty report")
    return valid, train


def early_stop_select(report, patience: int) -> Selection:
    """
    Early stopping with the given patience.

    Scanning the validation curve, stop at the first epoch which is
    *patience* epochs after the running best without a strict improvement,
    and select that running best. Ties keep the earliest epoch. A curve that
    ends first selects its global best and is flagged truncated.

    :param report: anything with ``valid_ua`` and ``train_ua`` curves.
    :param patience: epochs without improvement tolerated, at least 1.

    """
    if patience < 1:
        raise ParameterError(f"patience must be at least 1, got {patience}")
    valid, train = _curves(report)
    best = 0
    stop = None
    for e in range(1, len(valid)):
        if valid[e] > valid[best]:
            best = e
        elif e - best >= patience:
            stop = e
            break
    return Selection(epoch=best + 1, valid_ua=valid[best], gap=train[best] - valid[best],
                     stop_epoch=(stop if stop is not None else len(valid) - 1) + 1,
                     truncated=stop is None)


def final_epoch_select(report) -> Selection:
    '''Select the last epoch, for runs trained a fixed number of epochs.'''
    valid, train = _curves(report)
    return Selection(epoch=len(valid), valid_ua=valid[-1], gap=train[-1] - valid[-1], stop_epoch=len(valid))


@dataclass
class SweepResult:
    """
    Per model and patience, the selections of every (fold, seed) run.

    :param patiences: strictly increasing patience values.
    :param selections: model -> patience -> run key -> selection.

    """
    patiences: List[int]
    selections: Dict[str, Dict[int, Dict[RunKey, Selection]]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.patiences or any(b <= a for a, b in zip(self.patiences, self.patiences[1:])):
            raise ParameterError(f"patience list must be non-empty and strictly increasing, got {self.patiences}")

    @property
    def models(self) -> List[str]:
        return list(self.selections)

    def runs(self, model: str) -> List[RunKey]:
        return sorted(self.selections[model][self.patiences[0]])

    def mean_ua(self, model: str, patience: int) -> float:
        return float(np.mean([s.valid_ua for s in self.selections[model][patience].values()]))

    def mean_gap(self, model: str, patience: int) -> float:
        return float(np.mean([s.gap for s in self.selections[model][patience].values()]))

    def merge(self, other: "SweepResult") -> "SweepResult":
        """
        Combine the models of two sweeps.

        :raises ConsistencyError: if patience lists or (fold, seed) grids differ.

        """
        if other.patiences != self.patiences:
            raise ConsistencyError(f"patience lists differ: {self.patiences} and {other.patiences}")
        merged = SweepResult(list(self.patiences), dict(self.selections))
        for model in other.models:
            if self.models and other.runs(model) != self.runs(self.models[0]):
                raise ConsistencyError(f"model '{model}' has runs {other.runs(model)} but "
                                       f"'{self.models[0]}' has {self.runs(self.models[0])}")
            merged.selections[model] = other.selections[model]
        return merged

    def by_seed(self) -> Dict[int, "SweepResult"]:
        '''One sweep per seed, over that seed's folds.'''
        seeds = sorted({seed for model in self.models for _, seed in self.runs(model)})
        out = {}
        for seed in seeds:
            out[seed] = SweepResult(list(self.patiences), {
                model: {p: {k: s for k, s in runs.items() if k[1] == seed} for p, runs in by_p.items()}
                for model, by_p in self.selections.items()})
        return out

    def highlights(self, baseline: str) -> Dict[Tuple[str, int], Set[str]]:
        """
        Flag cells against the baseline model at the same patience.

        better_ua marks a higher mean UA, smaller_gap a smaller mean gap, and
        preferred a UA no worse together with a smaller gap.

        """
        if baseline not in self.selections:
            raise ConsistencyError(f"baseline '{baseline}' is not in the sweep ({', '.join(self.models)})")
        flags: Dict[Tuple[str, int], Set[str]] = {}
        for model in self.models:
            if model == baseline:
                continue
            for p in self.patiences:
                cell = set()
                ua, base_ua = self.mean_ua(model, p), self.mean_ua(baseline, p)
                gap, base_gap = self.mean_gap(model, p), self.mean_gap(baseline, p)
                if ua > base_ua:
                    cell.add(BETTER_UA)
                if gap < base_gap:
                    cell.add(SMALLER_GAP)
                    if ua >= base_ua:
                        cell.add(PREFERRED)
                flags[(model, p)] = cell
        return flags

    def rows(self, metric: str) -> List[List[float]]:
        getter = self.mean_ua if metric == "ua" else self.mean_gap
        return [[getter(model, p) for p in self.patiences] for model in self.models]

    def to_text(self, baseline: Optional[str] = None) -> str:
        """
        Two aligned tables, validation UA then gap, models by patience.

        With a baseline, ``*`` marks a better UA and ``!`` a preferred cell.

        """
        flags = self.highlights(baseline) if baseline else {}
        width = max([len("model")] + [len(m) for m in self.models]) + 2
        out = []
        for metric, title in (("ua", "validation UA (%)"), ("gap", "train - validation UA gap (%)")):
            out.append(title)
            out.append("model".ljust(width) + "".join(f"{p:>9}" for p in self.patiences))
            for model, values in zip(self.models, self.rows(metric)):
                cells = []
                for p, value in zip(self.patiences, values):
                    cell = flags.get((model, p), set())
                    mark = ("*" if metric == "ua" and BETTER_UA in cell else "") + \
                           ("!" if PREFERRED in cell else "")
                    cells.append(f"{value:.2f}{mark}".rjust(9))
                out.append(model.ljust(width) + "".join(cells))
            out.append("")
        return "\n".join(out)

    def to_csv(self) -> str:
        '''metric,model,<patience>... rows with values to 2 decimals, as in the text table.'''
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["metric", "model"] + [str(p) for p in self.patiences])
        for metric in ("ua", "gap"):
            for model, values in zip(self.models, self.rows(metric)):
                writer.writerow([metric, model] + [f"{v:.2f}" for v in values])
        return buffer.getvalue()


def sweep_patience(reports: Mapping[RunKey, object], patiences: Sequence[int], model: str = "model") -> SweepResult:
    """
    Apply :func:`early_stop_select` to every run for every patience.

    :param reports: (fold, seed) -> report of one model.
    :param patiences: strictly increasing patience values.
    :param model: the row name of this model.

    """
    if not reports:
        raise ParameterError(f"no reports to sweep for model '{model}'")
    result = SweepResult(list(patiences))
    result.selections[model] = {p: {key: early_stop_select(report, p) for key, report in sorted(reports.items())}
                                for p in result.patiences}
    return result


def gap_trend(sweeps_by_seed: Mapping[int, SweepResult], baseline: str, candidates: Sequence[str],
              patience: int) -> Dict[str, int]:
    '''For each candidate, the number of seeds whose mean gap at *patience* is below the baseline's.'''
    counts = {}
    for candidate in candidates:
        counts[candidate] = sum(1 for sweep in sweeps_by_seed.values()
                                if sweep.mean_gap(candidate, patience) < sweep.mean_gap(baseline, patience))
    return counts

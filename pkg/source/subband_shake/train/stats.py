##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
One-sided paired t-test, and the pairwise model comparison built on it.

"""
import csv
import io
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np
from scipy import stats

from subband_shake import ConsistencyError, DegenerateError, ParameterError, ShapeError
from subband_shake.train.evaluation import RunKey, Selection


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p_value: float
    mean_difference: float


def paired_t_statistic(a: Sequence[float], b: Sequence[float]) -> Tuple[float, int]:
    """
    t = mean(d) / (sd(d) / sqrt(n)) with d = a - b and the n-1 divisor.

    :returns: the statistic and its degrees of freedom.

    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"paired samples must be equal-length vectors, got {a.shape} and {b.shape}")
    n = a.size
    if n < 2:
        raise ParameterError(f"a paired t-test needs at least 2 pairs, got {n}")
    d = a - b
    if not np.any(d):
        raise DegenerateError(f"all {n} paired differences are zero, the t statistic is undefined")
    sd = d.std(ddof=1)
    mean = d.mean()
    if sd == 0:
        return math.copysign(math.inf, mean), n - 1
    return float(mean / (sd / math.sqrt(n))), n - 1


def one_sided_p_value(t: float, df: int) -> float:
    '''Upper-tail Student-t probability P(T > t).'''
    return float(stats.t.sf(t, df))


def paired_t_test_one_sided(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """
    Test whether *a* is greater than *b*, pairwise.

    A small p-value supports a > b. Swapping the arguments gives 1 - p.

    :raises DegenerateError: if every difference is zero.
    :raises ParameterError: for fewer than two pairs.

    """
    t, df = paired_t_statistic(a, b)
    return TTestResult(t=t, df=df, p_value=one_sided_p_value(t, df),
                       mean_difference=float(np.mean(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))))


# ----------------------------------------------------------------------------
# comparing models
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Comparison:
    """
    One ordered pair of models over the same (fold, seed) grid.

    :param candidate: the model tested for a higher validation UA and a smaller gap.
    :param reference: the model it is tested against.
    :param ua: the test of candidate UA > reference UA.
    :param gap: the test of candidate gap < reference gap.

    """
    candidate: str
    reference: str
    ua: TTestResult
    gap: TTestResult


def _paired(selections: Mapping[str, Mapping[RunKey, Selection]], candidate: str,
            reference: str) -> Tuple[List[Selection], List[Selection]]:
    keys_c, keys_r = sorted(selections[candidate]), sorted(selections[reference])
    if keys_c != keys_r:
        raise ConsistencyError(f"'{candidate}' has runs {keys_c} but '{reference}' has {keys_r}")
    return [selections[candidate][k] for k in keys_c], [selections[reference][k] for k in keys_r]


def compare_models(selections: Mapping[str, Mapping[RunKey, Selection]], candidate: str,
                   reference: str) -> Comparison:
    """
    Paired one-sided tests of *candidate* against *reference*.

    :param selections: model -> (fold, seed) -> selected epoch.
    :raises ConsistencyError: if the two (fold, seed) grids differ.
    :raises DegenerateError: if the two models agree on every run.

    """
    cand, ref = _paired(selections, candidate, reference)
    try:
        ua = paired_t_test_one_sided([s.valid_ua for s in cand], [s.valid_ua for s in ref])
        gap = paired_t_test_one_sided([s.gap for s in ref], [s.gap for s in cand])
    except DegenerateError as err:
        raise DegenerateError(f"comparing '{candidate}' with '{reference}': {err}") from err
    return Comparison(candidate, reference, ua, gap)


@dataclass
class ComparisonTable:
    """
    Every ordered pair of a list of models, plus their mean UA and gap.

    """
    models: List[str]
    comparisons: Dict[Tuple[str, str], Comparison]
    means: Dict[str, Tuple[float, float]]

    @property
    def df(self) -> int:
        return next(iter(self.comparisons.values())).ua.df

    def to_text(self) -> str:
        width = max(len(m) for m in self.models) + 2
        out = ["mean over runs", "model".ljust(width) + f"{'UA (%)':>10}{'gap (%)':>10}"]
        for model in self.models:
            ua, gap = self.means[model]
            out.append(model.ljust(width) + f"{ua:10.2f}{gap:10.2f}")
        out.append("")
        for metric, title in (("ua", "p-value, row UA > column UA"), ("gap", "p-value, row gap < column gap")):
            out.append(f"{title} (df={self.df})")
            out.append("".ljust(width) + "".join(m.rjust(width) for m in self.models))
            for row in self.models:
                cells = []
                for col in self.models:
                    comparison = self.comparisons.get((row, col))
                    cells.append("-".rjust(width) if comparison is None else
                                 f"{getattr(comparison, metric).p_value:.4f}".rjust(width))
                out.append(row.ljust(width) + "".join(cells))
            out.append("")
        return "\n".join(out)

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["candidate", "reference", "df", "t_ua", "p_ua", "t_gap", "p_gap"])
        for (candidate, reference), c in self.comparisons.items():
            writer.writerow([candidate, reference, c.ua.df, f"{c.ua.t:.6f}", f"{c.ua.p_value:.6f}",
                             f"{c.gap.t:.6f}", f"{c.gap.p_value:.6f}"])
        return buffer.getvalue()


def comparison_table(selections: Mapping[str, Mapping[RunKey, Selection]]) -> ComparisonTable:
    """
    Compare every ordered pair of distinct models.

    :raises ParameterError: for fewer than two models.

    """
    models = list(selections)
    if len(models) < 2:
        raise ParameterError(f"need at least two models to compare, got {models}")
    comparisons = {(a, b): compare_models(selections, a, b) for a in models for b in models if a != b}
    means = {m: (float(np.mean([s.valid_ua for s in selections[m].values()])),
                 float(np.mean([s.gap for s in selections[m].values()]))) for m in models}
    return ComparisonTable(models, comparisons, means)

##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
Speaker-independent, gender and corpus balanced k-fold partitioning.

"""
import logging
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, FrozenSet, List, Sequence, Set, Tuple, Union

from subband_shake import ConsistencyError, ParameterError
from subband_shake.data.manifest import GENDERS, UtteranceRecord
from subband_shake.util import make_rng

logger = logging.getLogger(__name__)

PARTITION_STREAM = 7


def actor_cells(manifest: Sequence[UtteranceRecord]) -> Dict[Tuple[str, str], List[str]]:
    """
    Group actor ids by (corpus, gender).

    :raises ConsistencyError: if an actor appears with two genders or corpora.

    """
    seen: Dict[str, Tuple[str, str]] = {}
    for record in manifest:
        cell = (record.corpus, record.gender)
        if seen.setdefault(record.actor_id, cell) != cell:
            raise ConsistencyError(f"actor '{record.actor_id}' appears as both {seen[record.actor_id]} and {cell}")
    cells: Dict[Tuple[str, str], List[str]] = defaultdict(list)
    for actor_id, cell in seen.items():
        cells[cell].append(actor_id)
    return {cell: sorted(actors) for cell, actors in sorted(cells.items())}


@dataclass(frozen=True)
class ActorPartition:
    '''k pairwise disjoint actor sets.'''
    sets: Tuple[FrozenSet[str], ...]

    def __post_init__(self):
        seen: Set[str] = set()
        for i, actors in enumerate(self.sets):
            overlap = seen & actors
            if overlap:
                raise ConsistencyError(f"actors {sorted(overlap)} are in more than one partition (set {i + 1})")
            seen |= actors

    @property
    def k(self) -> int:
        return len(self.sets)

    @property
    def actors(self) -> Set[str]:
        return set().union(*self.sets)

    def index_of(self, actor_id: str) -> int:
        for i, actors in enumerate(self.sets):
            if actor_id in actors:
                return i
        raise ConsistencyError(f"actor '{actor_id}' is in no partition")


def partition_actors(manifest: Sequence[UtteranceRecord], k: int = 4, seed: int = 0) -> ActorPartition:
    """
    Deal actors into k balanced partitions.

    Cells of (corpus, gender) are visited in sorted order. Inside a cell the
    actors are shuffled by the seed and dealt round-robin, and the dealing
    position carries on into the next cell, so partition sizes stay within
    one of each other as well as the per-cell counts.

    :raises ParameterError: for fewer actors than partitions.

    """
    cells = actor_cells(manifest)
    count = sum(len(actors) for actors in cells.values())
    if k < 2:
        raise ParameterError(f"need at least 2 partitions, got k={k}")
    if count < k:
        raise ParameterError(f"cannot deal {count} actors into {k} partitions")

    rng = make_rng(seed, PARTITION_STREAM)
    sets: List[Set[str]] = [set() for _ in range(k)]
    position = 0
    for actors in cells.values():
        for actor_id in rng.permutation(actors):
            sets[position % k].add(str(actor_id))
            position += 1
    partition = ActorPartition(tuple(frozenset(s) for s in sets))
    logger.debug(f"dealt {count} actors from {len(cells)} cells into {k} partitions")
    return partition


@dataclass
class Fold:
    index: int
    train: List[UtteranceRecord]
    validation: List[UtteranceRecord]

    @property
    def train_actors(self) -> Set[str]:
        return {r.actor_id for r in self.train}

    @property
    def validation_actors(self) -> Set[str]:
        return {r.actor_id for r in self.validation}


def make_folds(partition: ActorPartition, manifest: Sequence[UtteranceRecord]) -> List[Fold]:
    """
    Fold i validates on partition i and trains on the others.

    :raises ConsistencyError: if an actor is in no partition, or a fold leaks a speaker.

    """
    by_set: List[List[UtteranceRecord]] = [[] for _ in range(partition.k)]
    for record in manifest:
        by_set[partition.index_of(record.actor_id)].append(record)

    folds = []
    for i in range(partition.k):
        train = [r for j, records in enumerate(by_set) if j != i for r in records]
        fold = Fold(i, train, list(by_set[i]))
        leaked = fold.train_actors & fold.validation_actors
        if leaked:
            raise ConsistencyError(f"fold {i} has actors {sorted(leaked)} on both sides")
        folds.append(fold)
    return folds


# ----------------------------------------------------------------------------
# text dumps
# ----------------------------------------------------------------------------

def write_partition(fpath: Union[str, Path], partition: ActorPartition):
    """One section per partition, a header line followed by its actor ids."""
    lines = []
    for i, actors in enumerate(partition.sets):
        lines.append(f"[partition {i + 1}]")
        lines.extend(sorted(actors))
        lines.append("")
    fpath = Path(fpath)
    fpath.parent.mkdir(parents=True, exist_ok=True)
    fpath.write_text("\n".join(lines))


def read_partition(fpath: Union[str, Path]) -> ActorPartition:
    sets: List[Set[str]] = []
    for line in Path(fpath).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("[partition"):
            sets.append(set())
        elif not sets:
            raise ConsistencyError(f"{fpath}: actor '{line}' before the first partition header")
        else:
            sets[-1].add(line)
    return ActorPartition(tuple(frozenset(s) for s in sets))


def partition_summary(partition: ActorPartition, manifest: Sequence[UtteranceRecord]) -> str:
    """
    A table of "xF, yM" actor counts per corpus (rows) and partition (columns), with totals.

    """
    cells = actor_cells(manifest)
    corpora = sorted({corpus for corpus, _ in cells})

    def counts(actors: Set[str], corpus=None) -> str:
        parts = []
        for gender in GENDERS:
            keys = [(c, gender) for c in corpora if corpus in (None, c)]
            n = sum(len(actors.intersection(cells.get(key, []))) for key in keys)
            parts.append(f"{n}{gender}")
        return ", ".join(parts)

    header = ["corpus"] + [f"set {i + 1}" for i in range(partition.k)]
    rows = [[corpus] + [counts(set(s), corpus) for s in partition.sets] for corpus in corpora]
    rows.append(["total"] + [counts(set(s)) for s in partition.sets])
    widths = [max(len(r[c]) for r in [header] + rows) for c in range(len(header))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in [header] + rows)

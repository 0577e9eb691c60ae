##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
The utterance manifest: a UTF-8 CSV with one row per utterance.

Relative paths in a manifest are relative to the manifest's own folder.

"""
import csv
import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, List, Union

from subband_shake import ConsistencyError
from subband_shake.constants import EMOTIONS, WAV_FOLDER

logger = logging.getLogger(__name__)

GENDERS = ('F', 'M')


@dataclass(frozen=True)
class UtteranceRecord:
    utterance_id: str
    actor_id: str
    gender: str
    corpus: str
    label: str
    feature_path: str

    def __post_init__(self):
        if not self.utterance_id:
            raise ConsistencyError("utterance id must not be empty")
        if self.gender not in GENDERS:
            raise ConsistencyError(f"utterance '{self.utterance_id}' has gender '{self.gender}', "
                                   f"expected one of {', '.join(GENDERS)}")
        if self.label not in EMOTIONS:
            raise ConsistencyError(f"utterance '{self.utterance_id}' has label '{self.label}', "
                                   f"expected one of {', '.join(EMOTIONS)}")

    @property
    def label_index(self) -> int:
        return EMOTIONS.index(self.label)


MANIFEST_HEADER = [f.name for f in fields(UtteranceRecord)]


def read_manifest(fpath: Union[str, Path]) -> List[UtteranceRecord]:
    """
    Read and validate a manifest.

    :raises ConsistencyError: for a wrong header, a bad row or a duplicate utterance id.
    :raises OSError: if the file cannot be read.

    """
    fpath = Path(fpath)
    records: List[UtteranceRecord] = []
    seen = set()
    with open(fpath, newline='', encoding='utf-8') as infile:
        reader = csv.DictReader(infile)
        if reader.fieldnames != MANIFEST_HEADER:
            raise ConsistencyError(f"{fpath} has header {reader.fieldnames}, expected {MANIFEST_HEADER}")
        for line, row in enumerate(reader, start=2):
            try:
                record = UtteranceRecord(**row)
            except (ConsistencyError, TypeError) as err:
                raise ConsistencyError(f"{fpath} line {line}: {err}") from err
            if record.utterance_id in seen:
                raise ConsistencyError(f"{fpath} line {line}: duplicate utterance id '{record.utterance_id}'")
            seen.add(record.utterance_id)
            records.append(record)
    logger.debug(f"read {len(records)} manifest rows from {fpath}")
    return records


def write_manifest(fpath: Union[str, Path], records: Iterable[UtteranceRecord]):
    fpath = Path(fpath)
    fpath.parent.mkdir(parents=True, exist_ok=True)
    with open(fpath, 'w', newline='', encoding='utf-8') as outfile:
        writer = csv.DictWriter(outfile, fieldnames=MANIFEST_HEADER, lineterminator='\n')
        writer.writeheader()
        for record in records:
            writer.writerow(asdict(record))


def wav_path(manifest_path: Union[str, Path], record: UtteranceRecord) -> Path:
    '''Where the audio of *record* lives, next to its manifest.'''
    return Path(manifest_path).parent / WAV_FOLDER / f"{record.utterance_id}.wav"


def resolve_feature_path(manifest_path: Union[str, Path], record: UtteranceRecord) -> Path:
    path = Path(record.feature_path)
    return path if path.is_absolute() else Path(manifest_path).parent / path

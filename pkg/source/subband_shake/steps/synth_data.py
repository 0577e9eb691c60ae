##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
Generate the synthetic emotion corpus.

"""
from typing import List

from subband_shake import ConfigError
from subband_shake.constants import MANIFEST_NAME
from subband_shake.data.manifest import UtteranceRecord
from subband_shake.data.synth import SynthSpec, generate_synthetic_corpus
from subband_shake.experiment_config import ExperimentConfig
from subband_shake.logtools import EXPERIMENT, make_logger
from subband_shake.steps import step
from subband_shake.util import file_checksum

logger = make_logger(EXPERIMENT)


@step
def synth_data(config: ExperimentConfig) -> List[UtteranceRecord]:
    """
    Write the WAV files and manifest next to ``config.manifest_path``.

    The same root seed always produces the same manifest, byte for byte.

    :param config:
        Where to write, how many actors and utterances, and the root seed.

    """
    manifest = config.manifest_path
    if manifest.name != MANIFEST_NAME:
        raise ConfigError(f"generated manifests are always named {MANIFEST_NAME}, got {manifest}")

    out_dir = manifest.parent
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise OSError(f"cannot create output folder {out_dir}: {err}") from err

    spec = SynthSpec(actor_count=config.actors, per_class=config.per_class, corpora=tuple(config.corpora),
                     noise_level=config.noise_level, seed=config.root_seed)
    records = generate_synthetic_corpus(spec, out_dir, jobs=config.jobs)

    checksum = file_checksum(manifest).file_hash
    logger.info(f"{len(records)} rows written to {manifest} (crc32 {checksum:08x})")
    return records

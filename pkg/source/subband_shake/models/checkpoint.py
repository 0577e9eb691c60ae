##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
Model checkpoints.

A checkpoint file is a magic line, one line of JSON manifest (model name,
shake mode, free-form metadata and the ordered entry names with their dims),
then one 64-bit tensor container record per entry, in manifest order.
Running batch norm statistics are stored alongside the learnable tensors.

"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

from subband_shake import ConsistencyError
from subband_shake.autodiff.container import FLOAT64, read_tensor, write_tensor
from subband_shake.models.network import Model

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"SBTN-CHECKPOINT 1\n"


def save_checkpoint(model: Model, fpath: Union[str, Path], meta: Optional[Dict[str, Any]] = None):
    """
    Write the model's full state.

    :param model: the model.
    :param fpath: the output file.
    :param meta: JSON-serialisable extras, e.g. the epoch.

    """
    fpath = Path(fpath)
    state = model.state_dict()
    manifest = {
        "model": model.spec.name,
        "mode": str(model.spec.shake_mode),
        "meta": meta or {},
        "entries": [[name, list(value.shape)] for name, value in state.items()],
    }
    fpath.parent.mkdir(parents=True, exist_ok=True)
    with open(fpath, 'wb') as outfile:
        outfile.write(CHECKPOINT_MAGIC)
        outfile.write(json.dumps(manifest).encode() + b"\n")
        for value in state.values():
            write_tensor(outfile, value, FLOAT64)
    logger.debug(f"saved checkpoint with {len(state)} entries to {fpath}")


def read_checkpoint(fpath: Union[str, Path]):
    """
    :returns: the manifest dict and a name -> array dict.

    """
    fpath = Path(fpath)
    with open(fpath, 'rb') as infile:
        if infile.readline() != CHECKPOINT_MAGIC:
            raise ConsistencyError(f"{fpath} is not a checkpoint")
        try:
            manifest = json.loads(infile.readline())
        except json.JSONDecodeError as err:
            raise ConsistencyError(f"{fpath} has a corrupt manifest: {err}") from err
        state = {}
        for name, dims in manifest["entries"]:
            value = read_tensor(infile)
            if list(value.shape) != list(dims):
                raise ConsistencyError(f"{fpath}: entry '{name}' has dims {value.shape}, manifest says {dims}")
            state[name] = value
    return manifest, state


def load_checkpoint(model: Model, fpath: Union[str, Path]) -> Dict[str, Any]:
    """
    Restore a model's state from a checkpoint.

    :returns: the metadata stored with it.
    :raises ConsistencyError: if the checkpoint does not fit the model.

    """
    manifest, state = read_checkpoint(fpath)
    if manifest["model"] != model.spec.name:
        raise ConsistencyError(f"{fpath} holds a '{manifest['model']}' model, not '{model.spec.name}'")
    expected = set(model.state_dict())
    if set(state) != expected:
        extra = sorted(set(state) - expected)
        missing = sorted(expected - set(state))
        raise ConsistencyError(f"{fpath} does not match the model: unexpected {extra}, missing {missing}")
    model.load_state_dict(state)
    return manifest["meta"]

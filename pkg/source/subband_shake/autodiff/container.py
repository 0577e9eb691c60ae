##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
"""
The SBTN tensor container.

Layout, all little-endian: magic ``SBTN``, format version u8, dtype code u8,
rank u8, dims as u32, then the row-major payload.

"""
import logging
import struct
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np

from subband_shake import ConsistencyError, ParameterError

logger = logging.getLogger(__name__)

MAGIC = b"SBTN"
FORMAT_VERSION = 1

# dtype code -> numpy dtype
FLOAT32 = 0
FLOAT64 = 1
DTYPES = {
    FLOAT32: np.dtype('<f4'),
    FLOAT64: np.dtype('<f8'),
}


def write_tensor(outfile: BinaryIO, array: np.ndarray, dtype_code: int = FLOAT32):
    """
    Write one container record to an open binary stream.

    :param outfile: the stream.
    :param array: the values, cast to the dtype named by *dtype_code*.
    :param dtype_code: 0 for 32-bit or 1 for 64-bit floats.

    """
    if dtype_code not in DTYPES:
        raise ParameterError(f"unknown tensor dtype code {dtype_code}")
    array = np.asarray(array)
    if array.ndim > 255:
        raise ParameterError(f"tensor rank {array.ndim} does not fit the container")
    outfile.write(MAGIC)
    outfile.write(struct.pack('<BBB', FORMAT_VERSION, dtype_code, array.ndim))
    outfile.write(struct.pack(f'<{array.ndim}I', *array.shape))
    outfile.write(np.ascontiguousarray(array, dtype=DTYPES[dtype_code]).tobytes())


def _read_exact(infile: BinaryIO, count: int, what: str) -> bytes:
    data = infile.read(count)
    if len(data) != count:
        raise ConsistencyError(f"truncated tensor container: expected {count} bytes of {what}, "
                               f"got {len(data)}")
    return data


def read_tensor(infile: BinaryIO) -> np.ndarray:
    """
    Read one container record from an open binary stream.

    :returns: a float64 array, whatever the stored precision.

    """
    magic = _read_exact(infile, 4, "magic")
    if magic != MAGIC:
        raise ConsistencyError(f"not a tensor container, bad magic {magic!r}")
    version, dtype_code, rank = struct.unpack('<BBB', _read_exact(infile, 3, "header"))
    if version != FORMAT_VERSION:
        raise ConsistencyError(f"unsupported tensor container version {version}")
    if dtype_code not in DTYPES:
        raise ConsistencyError(f"unknown tensor dtype code {dtype_code}")
    dims = struct.unpack(f'<{rank}I', _read_exact(infile, 4 * rank, "dims"))
    dtype = DTYPES[dtype_code]
    count = int(np.prod(dims, dtype=np.int64))
    payload = _read_exact(infile, count * dtype.itemsize, "payload")
    return np.frombuffer(payload, dtype=dtype).reshape(dims).astype(np.float64)


def save_tensor(fpath: Union[str, Path], array: np.ndarray, dtype_code: int = FLOAT32):
    """Write a single tensor to a container file."""
    fpath = Path(fpath)
    with open(fpath, 'wb') as outfile:
        write_tensor(outfile, array, dtype_code)
    logger.debug(f"wrote tensor {np.shape(array)} to {fpath}")


def load_tensor(fpath: Union[str, Path]) -> np.ndarray:
    """Read a single tensor from a container file."""
    fpath = Path(fpath)
    with open(fpath, 'rb') as infile:
        try:
            return read_tensor(infile)
        except ConsistencyError as err:
            raise ConsistencyError(f"{fpath}: {err}") from err

##############################################################################
# (c) Crown copyright Met Office. All rights reserved.
# For further details please refer to the file COPYRIGHT
# which you should have received as part of this distribution
##############################################################################
import io
import struct

import numpy as np
import pytest

from subband_shake import ConsistencyError, ParameterError
from subband_shake.autodiff.container import (FLOAT32, FLOAT64, MAGIC, load_tensor, read_tensor, save_tensor,
                                              write_tensor)


class TestLayout():

    def test_header(self):
        buf = io.BytesIO()
        write_tensor(buf, np.zeros((2, 3)), FLOAT32)
        raw = buf.getvalue()
        assert raw[:4] == MAGIC
        assert struct.unpack('<BBB', raw[4:7]) == (1, FLOAT32, 2)
        assert struct.unpack('<2I', raw[7:15]) == (2, 3)
        assert len(raw) == 15 + 6 * 4

    def test_float64_is_exact(self, rng):
        values = rng.normal(size=(3, 4, 5))
        buf = io.BytesIO()
        write_tensor(buf, values, FLOAT64)
        buf.seek(0)
        assert np.array_equal(read_tensor(buf), values)

    def test_float32_rounds(self):
        buf = io.BytesIO()
        write_tensor(buf, np.array([0.1]), FLOAT32)
        buf.seek(0)
        out = read_tensor(buf)
        assert out.dtype == np.float64
        assert out[0] == np.float32(0.1)

    def test_scalar(self):
        buf = io.BytesIO()
        write_tensor(buf, np.float64(2.5), FLOAT64)
        buf.seek(0)
        out = read_tensor(buf)
        assert out.shape == ()
        assert out == 2.5

    def test_records_follow_each_other(self):
        buf = io.BytesIO()
        write_tensor(buf, np.ones(2))
        write_tensor(buf, np.zeros((1, 1)))
        buf.seek(0)
        assert read_tensor(buf).shape == (2, )
        assert read_tensor(buf).shape == (1, 1)


class TestErrors():

    def test_bad_dtype_code(self):
        with pytest.raises(ParameterError):
            write_tensor(io.BytesIO(), np.zeros(1), 7)

    def test_bad_magic(self):
        with pytest.raises(ConsistencyError, match="bad magic"):
            read_tensor(io.BytesIO(b"NOPE\x01\x00\x00"))

    def test_truncated(self):
        buf = io.BytesIO()
        write_tensor(buf, np.zeros(10))
        with pytest.raises(ConsistencyError, match="truncated"):
            read_tensor(io.BytesIO(buf.getvalue()[:-1]))

    def test_file_named(self, tmp_path):
        fpath = tmp_path / 'bad.sbtn'
        fpath.write_bytes(b"SBTN\x09\x00\x00")
        with pytest.raises(ConsistencyError, match="bad.sbtn.*version 9"):
            load_tensor(fpath)


def test_file_round_trip(tmp_path, rng):
    values = rng.normal(size=(4, 2))
    save_tensor(tmp_path / 'x.sbtn', values, FLOAT64)
    assert np.array_equal(load_tensor(tmp_path / 'x.sbtn'), values)

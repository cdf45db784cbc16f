import io
import numpy as np
import pytest
from numpy.testing import assert_array_equal
from mstcn.core.tensor import (DimensionError, FormatError, NumericalError,
                               as_tensor, blob_read, blob_write, matmul,
                               xavier_bound, xavier_init)
from mstcn.utils.random import check_state, derive_state


def test_blob_roundtrip():
    t = np.arange(24, dtype=np.float32).reshape(2, 3, 4) / 7.
    buf = io.BytesIO()
    n = blob_write(t, buf)
    assert n == 4 + 2 + 3 * 8 + t.nbytes
    buf.seek(0)
    out = blob_read(buf, np.float32)
    assert out.dtype == np.float32
    assert_array_equal(out, t)


def test_blob_scalar_and_bytes():
    buf = io.BytesIO()
    blob_write(np.array(3, dtype=np.int64), buf)
    blob_write(np.array([0, 1, 1], dtype=np.uint8), buf)
    buf.seek(0)
    assert blob_read(buf).shape == ()
    assert_array_equal(blob_read(buf), [0, 1, 1])


def test_blob_errors():
    with pytest.raises(FormatError):
        blob_read(io.BytesIO(b'XXXX\x01\x00'))
    buf = io.BytesIO()
    blob_write(np.zeros(10, dtype=np.float64), buf)
    with pytest.raises(FormatError):
        blob_read(io.BytesIO(buf.getvalue()[:-3]))
    buf.seek(0)
    with pytest.raises(FormatError):
        blob_read(buf, np.float32)
    with pytest.raises(FormatError):
        blob_write(np.zeros(3, dtype=np.complex128), io.BytesIO())


def test_matmul():
    rs = check_state(0)
    a = rs.standard_normal((4, 3))
    b = rs.standard_normal((3, 5))
    assert_array_equal(matmul(a, b), matmul(a, b))
    with pytest.raises(DimensionError):
        matmul(a, a)
    with pytest.raises(NumericalError):
        matmul(np.full((2, 2), np.inf), np.eye(2))


def test_as_tensor():
    with pytest.raises(DimensionError):
        as_tensor(np.zeros((2, 3)), ndim=3)
    with pytest.raises(NumericalError):
        as_tensor([1., np.nan])


def test_xavier():
    w = xavier_init(64, 32, check_state(1))
    bound = xavier_bound(64, 32)
    assert w.shape == (64, 32) and w.dtype == np.float32
    assert np.all(np.abs(w) <= bound)
    assert np.max(np.abs(w)) > 0.9 * bound
    assert_array_equal(w, xavier_init(64, 32, check_state(1)))
    with pytest.raises(DimensionError):
        xavier_init(0, 3, check_state(0))


def test_derive_state():
    a = derive_state(7, 1, 3).random(5)
    assert_array_equal(a, derive_state(7, 1, 3).random(5))
    assert not np.array_equal(a, derive_state(7, 1, 4).random(5))
    assert not np.array_equal(a, derive_state(7, 0, 3).random(5))
    with pytest.raises(ValueError):
        derive_state(7, -1)


def test_blob_byte_count():
    buf = io.BytesIO()
    assert blob_write(np.eye(2, dtype=np.float32), buf) == 38
    assert len(buf.getvalue()) == 38
    assert buf.getvalue()[:6] == b'MSTC\x01\x02'


def test_blob_random_tensors():
    rs = check_state(11)
    dtypes = (np.float32, np.float64, np.int64, np.uint8)
    for _ in range(1000):
        shape = tuple(int(d) for d in rs.integers(0, 5, rs.integers(0, 5)))
        dtype = dtypes[int(rs.integers(4))]
        if np.dtype(dtype).kind == 'f':
            t = np.asarray(rs.standard_normal(shape), dtype=dtype)
        else:
            t = np.asarray(rs.integers(0, 256, shape), dtype=dtype)
        buf = io.BytesIO()
        blob_write(t, buf)
        buf.seek(0)
        out = blob_read(buf)
        assert out.dtype == dtype and out.shape == shape
        assert out.tobytes() == t.tobytes()

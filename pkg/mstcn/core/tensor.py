import numpy as np
import struct

__all__ = ['DimensionError', 'FormatError', 'NumericalError', 'check_finite',
           'as_tensor', 'matmul', 'xavier_bound', 'xavier_init', 'blob_write',
           'blob_read', 'blob_save', 'blob_load', 'BLOB_MAGIC']


BLOB_MAGIC = b'MSTC'

# dtype code <-> numpy little-endian dtype
_DTYPE_CODES = {
    1: np.dtype('<f4'),
    2: np.dtype('<f8'),
    3: np.dtype('<i8'),
    4: np.dtype('u1'),
}
_CODE_OF = {(v.kind, v.itemsize): k for k, v in _DTYPE_CODES.items()}


class DimensionError(ValueError):
    """Raised when array shapes are inconsistent with an operation."""
    pass


class FormatError(ValueError):
    """Raised when a binary blob or manifest cannot be decoded."""
    pass


class NumericalError(FloatingPointError):
    """Raised when NaN or Inf shows up where finite values are required."""
    pass


def check_finite(x, what='tensor'):
    if not np.all(np.isfinite(x)):
        raise NumericalError('non-finite values encountered in {}.'.format(what))
    return x


def as_tensor(x, dtype=np.float32, ndim=None, what='tensor'):
    try:
        x = np.ascontiguousarray(x, dtype=dtype)
    except (TypeError, ValueError):
        raise DimensionError('failed to interpret {} as a {} array.'.format(
            what, np.dtype(dtype).name))
    if ndim is not None and x.ndim != ndim:
        raise DimensionError('{} should be {}-d, instead of shape {}.'.format(
            what, ndim, x.shape))
    return check_finite(x, what)


def matmul(a, b):
    """
    Plain 2-d matrix product.

    Parameters
    ----------
    a : 2-d array_like, shape (m, k)
    b : 2-d array_like, shape (k, n)

    Returns
    -------
    out : ndarray, shape (m, n)
        Same dtype as the promoted inputs. Repeated calls with the same shapes
        and the same BLAS thread count give bitwise identical results.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError('cannot multiply arrays with shapes {} and '
                             '{}.'.format(a.shape, b.shape))
    return check_finite(np.matmul(a, b), 'matmul output')


def xavier_bound(fan_in, fan_out):
    return float(np.sqrt(6. / (fan_in + fan_out)))


def xavier_init(fan_in, fan_out, random_state, shape=None, dtype=np.float32):
    """
    Glorot/Xavier uniform initialization.

    Values are drawn from U[-sqrt(6 / (fan_in + fan_out)),
    +sqrt(6 / (fan_in + fan_out))]. The result has shape `(fan_in, fan_out)`
    unless `shape` is given, in which case the fans only set the bound.
    """
    try:
        fan_in = int(fan_in)
        fan_out = int(fan_out)
        assert fan_in >= 1 and fan_out >= 1
    except (TypeError, ValueError, AssertionError):
        raise DimensionError('fan_in and fan_out should be positive ints, '
                             'instead of {} and {}.'.format(fan_in, fan_out))
    if shape is None:
        shape = (fan_in, fan_out)
    bound = xavier_bound(fan_in, fan_out)
    w = random_state.uniform(-bound, bound, size=shape)
    return np.ascontiguousarray(w, dtype=dtype)


def blob_write(t, sink):
    """
    Write one array to a binary stream.

    Layout: magic `MSTC`, u8 dtype code, u8 rank, rank x u64 little-endian
    dims, raw little-endian values in row-major order. Returns the number of
    bytes written.
    """
    t = np.asarray(t)
    try:
        code = _CODE_OF[(t.dtype.kind, t.dtype.itemsize)]
    except KeyError:
        raise FormatError('dtype {} cannot be stored in a blob.'.format(
            t.dtype))
    if t.ndim > 255:
        raise FormatError('rank {} is too large for a blob.'.format(t.ndim))
    header = BLOB_MAGIC + struct.pack('<BB', code, t.ndim)
    header += struct.pack('<{}Q'.format(t.ndim), *t.shape)
    body = np.ascontiguousarray(t, dtype=_DTYPE_CODES[code]).tobytes()
    sink.write(header)
    sink.write(body)
    return len(header) + len(body)


def _read_exact(source, n, what):
    buf = source.read(n)
    if len(buf) != n:
        raise FormatError('truncated blob: expected {} bytes of {}, got '
                          '{}.'.format(n, what, len(buf)))
    return buf


def blob_read(source, dtype=None):
    """
    Read one array written by `blob_write`.

    If `dtype` is given, the stored dtype must match it exactly.
    """
    magic = _read_exact(source, 4, 'magic')
    if magic != BLOB_MAGIC:
        raise FormatError('bad blob magic {!r}.'.format(magic))
    code, rank = struct.unpack('<BB', _read_exact(source, 2, 'header'))
    if code not in _DTYPE_CODES:
        raise FormatError('unknown blob dtype code {}.'.format(code))
    stored = _DTYPE_CODES[code]
    if dtype is not None and ((np.dtype(dtype).kind, np.dtype(dtype).itemsize)
                              != (stored.kind, stored.itemsize)):
        raise FormatError('blob dtype {} does not match the expected '
                          '{}.'.format(stored.name, np.dtype(dtype).name))
    shape = struct.unpack('<{}Q'.format(rank),
                          _read_exact(source, 8 * rank, 'dims'))
    count = int(np.prod(shape, dtype=np.int64))
    body = _read_exact(source, count * stored.itemsize, 'values')
    t = np.frombuffer(body, dtype=stored).reshape(shape)
    return t.astype(stored.newbyteorder('='), copy=True)


def blob_save(path, t):
    with open(path, 'wb') as f:
        return blob_write(t, f)


def blob_load(path, dtype=None):
    with open(path, 'rb') as f:
        return blob_read(f, dtype)

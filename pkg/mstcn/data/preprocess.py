import numpy as np
from collections import namedtuple

__all__ = ['DataError', 'Instance', 'Discard', 'IMU_LENGTH', 'IMU_CHANNELS',
           'MFCC_LENGTH', 'MFCC_CHANNELS', 'MIN_MFCC_FRAMES', 'pad_or_truncate',
           'tile_frames', 'preprocess']


IMU_LENGTH = 800
IMU_CHANNELS = 3
MFCC_LENGTH = 420
MFCC_CHANNELS = 13
MIN_MFCC_FRAMES = 20


class DataError(ValueError):
    """Raised on malformed dataset files or instances."""
    pass


Instance = namedtuple('Instance', ['instance_id', 'user_id', 'acc', 'gyro',
                                   'mfcc', 'ps', 'labels'])
Instance.__doc__ = """
One multi-modal example. `labels` holds integer codes, -1 for missing.
"""


Discard = namedtuple('Discard', ['instance_id', 'reason'])


def _window(x, channels, what, instance_id):
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 2 or x.shape[1] != channels:
        raise DataError('{} of instance {} should be L x {}, instead of shape '
                        '{}.'.format(what, instance_id, channels, x.shape))
    if x.shape[0] < 1:
        raise DataError('{} of instance {} is empty.'.format(what,
                                                             instance_id))
    if not np.all(np.isfinite(x)):
        raise DataError('{} of instance {} holds non-finite '
                        'values.'.format(what, instance_id))
    return x


def pad_or_truncate(x, length):
    """Zero-pad the tail up to `length` rows, or keep the first `length`."""
    x = np.asarray(x)
    if x.shape[0] >= length:
        return np.ascontiguousarray(x[:length])
    out = np.zeros((length,) + x.shape[1:], dtype=x.dtype)
    out[:x.shape[0]] = x
    return out


def tile_frames(x, length):
    """Repeat `x` cyclically along time, then keep the first `length` rows."""
    x = np.asarray(x)
    reps = -(-length // x.shape[0])
    return np.ascontiguousarray(np.tile(x, (reps, 1))[:length])


def preprocess(instance, imu_length=IMU_LENGTH, mfcc_length=MFCC_LENGTH,
               min_mfcc_frames=MIN_MFCC_FRAMES, ps_width=None):
    """
    Bring a raw instance to fixed-size windows.

    IMU windows are zero-padded at the tail or truncated to `imu_length`
    rows; MFCC sequences are tiled cyclically and truncated to `mfcc_length`
    frames. Sequences with fewer than `min_mfcc_frames` frames give a
    `Discard(instance_id, 'mfcc_too_short')` instead.

    Raises
    ------
    DataError
        On malformed channel counts, empty windows, or non-binary phone state.
    """
    iid = instance.instance_id
    acc = _window(instance.acc, IMU_CHANNELS, 'acc', iid)
    gyro = _window(instance.gyro, IMU_CHANNELS, 'gyro', iid)
    mfcc = _window(instance.mfcc, MFCC_CHANNELS, 'mfcc', iid)
    ps = np.asarray(instance.ps)
    if ps.ndim != 1 or (ps_width is not None and ps.shape[0] != ps_width):
        raise DataError('ps of instance {} should be a vector of width {}, '
                        'instead of shape {}.'.format(iid, ps_width, ps.shape))
    if np.any((ps != 0) & (ps != 1)):
        raise DataError('ps of instance {} should be binary.'.format(iid))
    if mfcc.shape[0] < min_mfcc_frames:
        return Discard(iid, 'mfcc_too_short')
    labels = np.asarray(instance.labels, dtype=np.int64)
    if labels.ndim != 1 or np.any((labels < -1) | (labels > 1)):
        raise DataError('labels of instance {} should be a vector of 0, 1 '
                        'and -1 (missing).'.format(iid))
    return Instance(iid, instance.user_id, pad_or_truncate(acc, imu_length),
                    pad_or_truncate(gyro, imu_length),
                    tile_frames(mfcc, mfcc_length), ps.astype(np.uint8),
                    labels)

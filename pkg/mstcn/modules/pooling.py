import numpy as np
from ..core.module import Layer
from ..core.tensor import DimensionError

__all__ = ['global_max_pool', 'global_avg_pool', 'GlobalMaxPool',
           'GlobalAvgPool']


def _check_temporal(x):
    x = np.asarray(x)
    if x.ndim not in (2, 3):
        raise DimensionError('x should be L x C or B x L x C, instead of shape '
                             '{}.'.format(x.shape))
    return x


def global_max_pool(x):
    """Per-channel max over the time axis (the second to last one)."""
    return _check_temporal(x).max(axis=-2)


def global_avg_pool(x):
    """Per-channel mean over the time axis (the second to last one)."""
    return _check_temporal(x).mean(axis=-2)


class GlobalMaxPool(Layer):
    """Global max pooling; the gradient goes to the first argmax per channel."""

    def _forward(self, x, mode, random_state):
        x = _check_temporal(x)
        index = np.expand_dims(np.argmax(x, axis=-2), -2)
        out = np.take_along_axis(x, index, axis=-2)
        return np.squeeze(out, -2), (index, x.shape)

    def _backward(self, grad, cache):
        index, shape = cache
        dx = np.zeros(shape, dtype=grad.dtype)
        np.put_along_axis(dx, index, np.expand_dims(grad, -2), axis=-2)
        return dx


class GlobalAvgPool(Layer):

    def _forward(self, x, mode, random_state):
        x = _check_temporal(x)
        return x.mean(axis=-2), x.shape

    def _backward(self, grad, shape):
        length = shape[-2]
        dx = np.broadcast_to(np.expand_dims(grad / length, -2), shape)
        return np.ascontiguousarray(dx)

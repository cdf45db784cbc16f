import numpy as np
from ..core.module import Layer
from ..core.tensor import DimensionError

__all__ = ['concat', 'flatten', 'split', 'Concat', 'Flatten']


def concat(parts, axis=-1):
    """Juxtapose `parts` along `axis`, preserving their order."""
    parts = [np.asarray(p) for p in parts]
    if not parts:
        raise DimensionError('concat needs at least one part.')
    if len(parts) == 1:
        return parts[0]
    try:
        return np.concatenate(parts, axis=axis)
    except ValueError:
        raise DimensionError('cannot concatenate parts with shapes {} along '
                             'axis {}.'.format([p.shape for p in parts], axis))


def split(x, sizes, axis=-1):
    """Inverse of `concat` for parts of the given sizes along `axis`."""
    if sum(sizes) != np.shape(x)[axis]:
        raise DimensionError('sizes {} do not add up to {} along axis '
                             '{}.'.format(sizes, np.shape(x)[axis], axis))
    return np.split(x, np.cumsum(sizes)[:-1], axis=axis)


def flatten(x, batched=False):
    """
    Row-major flattening. An unbatched input gives a `1 x n` row; with
    `batched=True` the leading axis is kept, giving `B x n`.
    """
    x = np.asarray(x)
    if batched:
        return x.reshape(x.shape[0], -1)
    return x.reshape(1, -1)


class Concat(Layer):
    """
    Concatenation of several inputs, given to `forward` as a list.

    `backward` returns the list of per-part gradients.
    """
    def __init__(self, axis=-1, name=None):
        super().__init__(name)
        self._axis = int(axis)

    @property
    def axis(self):
        return self._axis

    def _forward(self, parts, mode, random_state):
        parts = [np.asarray(p) for p in parts]
        sizes = [p.shape[self._axis] for p in parts]
        return concat(parts, self._axis), sizes

    def _backward(self, grad, sizes):
        return split(grad, sizes, self._axis)


class Flatten(Layer):
    """Flattens every axis but the leading (batch) one."""

    def _forward(self, x, mode, random_state):
        x = np.asarray(x)
        return flatten(x, batched=True), x.shape

    def _backward(self, grad, shape):
        return grad.reshape(shape)

import numpy as np
from ..core.module import Layer
from ..utils.random import check_state

__all__ = ['dropout', 'Dropout']


def _check_rate(rate):
    try:
        rate = float(rate)
        assert 0. <= rate < 1.
    except (TypeError, ValueError, AssertionError):
        raise ValueError('rate should be a float in [0, 1), instead of '
                         '{}.'.format(rate))
    return rate


def dropout(x, rate, mode='infer', random_state=None):
    """
    Inverted dropout.

    In train mode every element is zeroed with probability `rate` and the
    survivors are scaled by `1 / (1 - rate)`; infer mode is the identity.
    """
    rate = _check_rate(rate)
    x = np.asarray(x)
    if mode == 'infer' or rate == 0.:
        return x
    if mode != 'train':
        raise ValueError('mode should be "train" or "infer", instead of '
                         '{}.'.format(mode))
    keep = check_state(random_state).random(x.shape) >= rate
    return x * keep.astype(x.dtype) / x.dtype.type(1. - rate)


class Dropout(Layer):

    def __init__(self, rate=0.2, name=None):
        super().__init__(name)
        self._rate = _check_rate(rate)
        self._frozen = None

    @property
    def rate(self):
        return self._rate

    @property
    def frozen(self):
        return self._frozen is not None

    def freeze(self, mask):
        """Reuse a fixed keep-mask in train mode, e.g. for gradient checks."""
        self._frozen = np.asarray(mask, dtype=bool)

    def unfreeze(self):
        self._frozen = None

    def _forward(self, x, mode, random_state):
        x = np.asarray(x)
        if mode == 'infer' or self._rate == 0.:
            return x, False
        if self._frozen is not None:
            keep = np.broadcast_to(self._frozen, x.shape)
        else:
            if random_state is None:
                raise ValueError('train-mode dropout needs a random_state.')
            keep = check_state(random_state).random(x.shape) >= self._rate
        scale = keep.astype(x.dtype) / x.dtype.type(1. - self._rate)
        return x * scale, scale

    def _backward(self, grad, scale):
        if scale is False:
            return grad
        return grad * scale

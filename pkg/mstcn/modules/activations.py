import numpy as np
from scipy.special import expit
from ..core.module import Layer

__all__ = ['relu', 'sigmoid', 'open_unit', 'ReLU', 'Sigmoid']


def relu(x):
    return np.maximum(x, 0)


def open_unit(p):
    """Clip probabilities into the open interval (0, 1) of their dtype."""
    p = np.asarray(p)
    info = np.finfo(p.dtype if p.dtype.kind == 'f' else np.float64)
    return np.clip(p, info.tiny, 1 - info.epsneg)


def sigmoid(x):
    # expit uses e^x / (1 + e^x) for x < 0, so large negative x stays finite;
    # float32 still saturates to 0 or 1 exactly, hence the clip
    return open_unit(expit(x))


class ReLU(Layer):

    def _forward(self, x, mode, random_state):
        return relu(x), x > 0

    def _backward(self, grad, positive):
        return grad * positive


class Sigmoid(Layer):
    """
    Logistic output layer.

    The model evaluates its loss from the logits, so during training the
    output gradient is usually injected below this layer; `backward` is still
    exact for standalone use.
    """
    def _forward(self, x, mode, random_state):
        y = sigmoid(x)
        return y, y

    def _backward(self, grad, y):
        return grad * y * (1 - y)

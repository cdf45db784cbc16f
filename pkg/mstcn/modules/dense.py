import numpy as np
from ..core.module import Layer
from ..core.tensor import DimensionError, matmul, xavier_init

__all__ = ['dense_forward', 'Dense']


def dense_forward(x, w, b):
    """Affine map `x @ w + b` for `x` of shape `(B, D)`."""
    x = np.asarray(x)
    w = np.asarray(w)
    b = np.asarray(b)
    if x.ndim != 2:
        raise DimensionError('x should be B x D, instead of shape '
                             '{}.'.format(x.shape))
    if w.ndim != 2 or b.shape != (w.shape[1],):
        raise DimensionError('dense weights should be D x U with a U bias, '
                             'instead of {} and {}.'.format(w.shape, b.shape))
    return matmul(x, w) + b


class Dense(Layer):
    """
    Fully connected layer.

    Parameters
    ----------
    in_units : int
        Input width D.
    units : int
        Output width U.
    random_state : Generator
        Used for the Xavier initialization of the `D x U` weight.
    dtype : dtype, optional
        Set to `np.float32` by default.
    name : str or None, optional
    penalty : str or None, optional
        Penalty kind attached to the weight. Set to `'l1'` by default; the
        bias is never penalized.
    """
    def __init__(self, in_units, units, random_state, dtype=np.float32,
                 name=None, penalty='l1'):
        super().__init__(name)
        try:
            in_units = int(in_units)
            units = int(units)
            assert in_units >= 1 and units >= 1
        except (TypeError, ValueError, AssertionError):
            raise ValueError('in_units and units should be positive ints, '
                             'instead of {} and {}.'.format(in_units, units))
        self._add_param('weight', xavier_init(in_units, units, random_state,
                                              dtype=dtype), penalty)
        self._add_param('bias', np.zeros(units, dtype))

    @property
    def in_units(self):
        return self._params['weight'].shape[0]

    @property
    def units(self):
        return self._params['weight'].shape[1]

    def _forward(self, x, mode, random_state):
        return dense_forward(x, self._params['weight'],
                             self._params['bias']), x

    def _backward(self, grad, x):
        self._grads['weight'][...] = matmul(x.T, grad)
        self._grads['bias'][...] = grad.sum(axis=0)
        return matmul(grad, self._params['weight'].T)

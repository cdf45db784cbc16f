import numpy as np
from collections import OrderedDict
from .tensor import DimensionError, check_finite

__all__ = ['Layer', 'Sequential', 'layer_backward', 'MODES']


MODES = ('train', 'infer')


class Layer:
    """
    Base class for differentiable layers.

    A layer owns its parameters, the gradients of the last backward pass, and
    the forward cache needed by that backward pass. The cache is valid only
    between one `forward` and its matching `backward`.

    Parameters
    ----------
    name : str or None, optional
        Label of the layer, used in error messages.

    Notes
    -----
    Subclasses implement `_forward(x, mode, random_state)` returning
    `(out, cache)` and `_backward(grad, cache)` returning the input gradient
    while writing parameter gradients into `self._grads`.
    """
    def __init__(self, name=None):
        self.name = name
        self._params = OrderedDict()
        self._grads = OrderedDict()
        self._penalties = OrderedDict()
        self._cache = None
        self._out_shape = None

    def _add_param(self, key, value, penalty=None):
        if penalty not in (None, 'l1', 'l2'):
            raise ValueError('penalty should be None, "l1" or "l2", instead '
                             'of {}.'.format(penalty))
        self._params[key] = value
        self._grads[key] = np.zeros_like(value)
        self._penalties[key] = penalty

    @property
    def name(self):
        return self._name

    @name.setter
    def name(self, tag):
        if isinstance(tag, str) or tag is None:
            self._name = tag
        else:
            raise ValueError(
                'name should be a str or None, instead of {}.'.format(tag))

    @property
    def params(self):
        return self._params

    @property
    def grads(self):
        return self._grads

    @property
    def penalties(self):
        return self._penalties

    @property
    def n_param(self):
        return int(sum(p.size for p in self._params.values()))

    @property
    def has_cache(self):
        return self._cache is not None

    def forward(self, x, mode='infer', random_state=None):
        if mode not in MODES:
            raise ValueError('mode should be "train" or "infer", instead of '
                             '{}.'.format(mode))
        out, cache = self._forward(x, mode, random_state)
        check_finite(out, 'output of {}'.format(self._label()))
        self._cache = cache
        self._out_shape = np.shape(out)
        return out

    def backward(self, grad):
        if self._cache is None:
            raise RuntimeError('backward of {} called without a matching '
                               'forward.'.format(self._label()))
        if np.shape(grad) != self._out_shape:
            raise DimensionError(
                'upstream gradient of {} should have shape {}, instead of '
                '{}.'.format(self._label(), self._out_shape, np.shape(grad)))
        cache, self._cache = self._cache, None
        return self._backward(grad, cache)

    def zero_grads(self):
        for g in self._grads.values():
            g.fill(0)

    def astype(self, dtype):
        for k in self._params:
            self._params[k] = self._params[k].astype(dtype)
            self._grads[k] = self._grads[k].astype(dtype)
        self._cache = None
        return self

    def _label(self):
        return '{}({})'.format(type(self).__name__, self._name or '')

    def _forward(self, x, mode, random_state):
        raise NotImplementedError('Abstract Method.')

    def _backward(self, grad, cache):
        raise NotImplementedError('Abstract Method.')


class Sequential(Layer):
    """
    A named chain of layers, the unit of activation capture.

    At most one member may hold parameters, so qualified parameter names are
    simply `<block name>.<param name>`.
    """
    def __init__(self, layers, name):
        super().__init__(name)
        try:
            layers = list(layers)
            assert len(layers) > 0
            assert all(isinstance(la, Layer) for la in layers)
        except (TypeError, AssertionError):
            raise ValueError('layers should be a non-empty sequence of '
                             'Layer(s).')
        if sum(1 for la in layers if la.params) > 1:
            raise ValueError('block {} has more than one parametric '
                             'layer.'.format(name))
        self._layers = layers

    @property
    def layers(self):
        return list(self._layers)

    def _owner(self):
        for la in self._layers:
            if la.params:
                return la
        return None

    def _qualify(self, d):
        return OrderedDict(('{}.{}'.format(self._name, k), v)
                           for k, v in d.items())

    @property
    def params(self):
        owner = self._owner()
        return OrderedDict() if owner is None else self._qualify(owner.params)

    @property
    def grads(self):
        owner = self._owner()
        return OrderedDict() if owner is None else self._qualify(owner.grads)

    @property
    def penalties(self):
        owner = self._owner()
        return (OrderedDict() if owner is None else
                self._qualify(owner.penalties))

    @property
    def n_param(self):
        return int(sum(la.n_param for la in self._layers))

    @property
    def has_cache(self):
        return any(la.has_cache for la in self._layers)

    def forward(self, x, mode='infer', random_state=None):
        for la in self._layers:
            x = la.forward(x, mode, random_state)
        self._out_shape = np.shape(x)
        return x

    def backward(self, grad):
        for la in reversed(self._layers):
            grad = la.backward(grad)
        return grad

    def zero_grads(self):
        for la in self._layers:
            la.zero_grads()

    def astype(self, dtype):
        for la in self._layers:
            la.astype(dtype)
        return self


def layer_backward(layer, grad):
    """Input gradient of `layer`; parameter gradients land in `layer.grads`."""
    if not isinstance(layer, Layer):
        raise ValueError('layer should be a Layer.')
    return layer.backward(grad)

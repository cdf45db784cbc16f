import numpy as np
from collections import OrderedDict
from ..core.tensor import NumericalError

__all__ = ['Adam']


class Adam:
    """
    Bias-corrected Adam, updating parameter arrays in place.

    Parameters
    ----------
    lr : float, optional
        Step size. Set to `1e-4` by default.
    beta1 : float, optional
        Set to `0.9` by default.
    beta2 : float, optional
        Set to `0.999` by default.
    eps : float, optional
        Set to `1e-8` by default.
    """
    def __init__(self, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.reset()

    @property
    def lr(self):
        return self._lr

    @lr.setter
    def lr(self, value):
        value = float(value)
        if not value > 0.:
            raise ValueError('lr should be a positive float, instead of '
                             '{}.'.format(value))
        self._lr = value

    @property
    def beta1(self):
        return self._beta1

    @beta1.setter
    def beta1(self, value):
        value = float(value)
        if not 0. <= value < 1.:
            raise ValueError('beta1 should be in [0, 1), instead of '
                             '{}.'.format(value))
        self._beta1 = value

    @property
    def beta2(self):
        return self._beta2

    @beta2.setter
    def beta2(self, value):
        value = float(value)
        if not 0. <= value < 1.:
            raise ValueError('beta2 should be in [0, 1), instead of '
                             '{}.'.format(value))
        self._beta2 = value

    @property
    def eps(self):
        return self._eps

    @eps.setter
    def eps(self, value):
        value = float(value)
        if not value > 0.:
            raise ValueError('eps should be a positive float, instead of '
                             '{}.'.format(value))
        self._eps = value

    @property
    def t(self):
        return self._t

    @property
    def m(self):
        return self._m

    @property
    def v(self):
        return self._v

    def reset(self):
        self._t = 0
        self._m = OrderedDict()
        self._v = OrderedDict()

    def step(self, params, grads):
        """
        One update of every parameter in `params` from the matching `grads`.

        Raises NumericalError, before touching anything, if a gradient holds
        NaN or Inf.
        """
        if set(params) != set(grads):
            raise ValueError('params and grads should have the same names.')
        for name, g in grads.items():
            if g.shape != params[name].shape:
                raise ValueError('grad of {} has shape {}, but the parameter '
                                 'has {}.'.format(name, g.shape,
                                                  params[name].shape))
            if not np.all(np.isfinite(g)):
                with np.errstate(invalid='ignore', over='ignore'):
                    norm = float(np.linalg.norm(g.astype(np.float64)))
                raise NumericalError(
                    'non-finite gradient at step {} in parameter {} (norm '
                    '{}).'.format(self._t + 1, name, norm))
        self._t += 1
        c1 = 1. - self._beta1**self._t
        c2 = 1. - self._beta2**self._t
        for name, p in params.items():
            g = grads[name]
            if name not in self._m:
                self._m[name] = np.zeros_like(p)
                self._v[name] = np.zeros_like(p)
            m = self._m[name]
            v = self._v[name]
            m *= self._beta1
            m += (1. - self._beta1) * g
            v *= self._beta2
            v += (1. - self._beta2) * np.square(g)
            p -= self._lr * (m / c1) / (np.sqrt(v / c2) + self._eps)

    def state_dict(self):
        return OrderedDict([
            ('t', self._t), ('lr', self._lr), ('beta1', self._beta1),
            ('beta2', self._beta2), ('eps', self._eps),
            ('m', OrderedDict((k, np.copy(a)) for k, a in self._m.items())),
            ('v', OrderedDict((k, np.copy(a)) for k, a in self._v.items()))])

    def load_state_dict(self, state):
        for key in ('lr', 'beta1', 'beta2', 'eps'):
            setattr(self, key, state[key])
        t = int(state['t'])
        if t < 0:
            raise ValueError('t should be non-negative, instead of '
                             '{}.'.format(t))
        if set(state['m']) != set(state['v']):
            raise ValueError('m and v should hold the same parameters.')
        if any(np.any(a < 0) for a in state['v'].values()):
            raise ValueError('v should be non-negative.')
        self._t = t
        self._m = OrderedDict((k, np.array(a)) for k, a in state['m'].items())
        self._v = OrderedDict((k, np.array(a)) for k, a in state['v'].items())

    def __repr__(self):
        return 'Adam(lr={}, beta1={}, beta2={}, eps={}, t={})'.format(
            self._lr, self._beta1, self._beta2, self._eps, self._t)

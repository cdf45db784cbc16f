"""
Finite-difference verification of the analytic backward passes.
"""

import logging
import numpy as np
from collections import namedtuple, OrderedDict
from numdifftools import Derivative
from ..core.module import Layer
from ..core.objective import LabelMatrix, uniform_weights, weighted_masked_bce
from ..core.tensor import NumericalError
from ..utils.random import check_state
from .activations import ReLU, Sigmoid
from .conv import ConvSpec, conv_layer
from .dense import Dense
from .dropout import Dropout
from .pooling import GlobalMaxPool, GlobalAvgPool
from .shape import Concat, Flatten

__all__ = ['GradcheckReport', 'check_gradients', 'check_layer', 'check_model',
           'check_loss', 'gradcheck', 'layer_suite', 'model_suite']


logger = logging.getLogger(__name__)

GradcheckReport = namedtuple('GradcheckReport', ['max_rel_err', 'n_checked',
                                                 'n_skipped', 'passed'])
GradcheckReport.__doc__ = """
Outcome of one gradient check. `max_rel_err` maps parameter (or input) names
to the largest relative error over their checked coordinates.
"""

_FLOOR = 1e-8


def _rel_err(a, n):
    return abs(a - n) / max(abs(a), abs(n), _FLOOR)


def _is_kink(d_plus, d_minus, kink_tol):
    return abs(d_plus - d_minus) > kink_tol * max(abs(d_plus), abs(d_minus),
                                                  _FLOOR)


def check_gradients(fun, params, grads, h=1e-5, tol=1e-4, n_coord=200,
                    random_state=None, kink_tol=1e-2, exclude=None,
                    method='central'):
    """
    Compare analytic gradients with numerical derivatives of a scalar.

    Parameters
    ----------
    fun : callable
        Takes no arguments and evaluates the scalar from the current values of
        `params`, which are perturbed in place.
    params : dict
        name -> float64 array.
    grads : dict
        name -> analytic gradient, shaped like `params[name]`.
    h : float, optional
        Finite-difference step. Set to `1e-5` by default.
    tol : float, optional
        Pass iff every checked coordinate has relative error below `tol`,
        with denominator `max(|a|, |n|, 1e-8)`. A check with no
        coordinate left after skipping never passes.
    n_coord : int, optional
        Coordinates to sample in total, spread evenly over the parameters.
    random_state : int, Generator or None, optional
    kink_tol : float, optional
        A coordinate whose one-sided differences disagree by more than this
        share is at a non-differentiable point and is skipped.
    exclude : dict or None, optional
        name -> bool mask of coordinates to skip explicitly.
    method : str, optional
        `'central'` for `(f(x + h) - f(x - h)) / 2h`, or `'numdifftools'` to
        let `numdifftools.Derivative` estimate the derivative.

    Returns
    -------
    GradcheckReport
    """
    if method not in ('central', 'numdifftools'):
        raise ValueError('method should be "central" or "numdifftools", '
                         'instead of "{}".'.format(method))
    h = float(h)
    if not h > 0.:
        raise ValueError('h should be positive, instead of {}.'.format(h))
    if set(params) != set(grads):
        raise ValueError('params and grads should have the same names.')
    if not params:
        raise ValueError('there is nothing to check.')
    rs = check_state(random_state)
    exclude = exclude or {}
    per_param = max(-(-int(n_coord) // len(params)), 1)

    def value():
        f = float(fun())
        if not np.isfinite(f):
            raise NumericalError('the checked function returned {}.'.format(f))
        return f

    f0 = value()
    max_rel_err = OrderedDict()
    n_checked = 0
    n_skipped = 0
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise ValueError('gradient of {} should have shape {}, instead of '
                             '{}.'.format(name, p.shape, g.shape))
        if not np.all(np.isfinite(g)):
            raise NumericalError('analytic gradient of {} is not '
                                 'finite.'.format(name))
        mask = exclude.get(name)
        coords = rs.choice(p.size, min(p.size, per_param), replace=False)
        worst = 0.
        for j in coords:
            if mask is not None and np.asarray(mask).flat[j]:
                n_skipped += 1
                continue
            v = p.flat[j]
            p.flat[j] = v + h
            f_plus = value()
            p.flat[j] = v - h
            f_minus = value()
            p.flat[j] = v
            if _is_kink((f_plus - f0) / h, (f0 - f_minus) / h, kink_tol):
                n_skipped += 1
                continue
            if method == 'central':
                numeric = (f_plus - f_minus) / (2. * h)
            else:
                def along(t):
                    p.flat[j] = t
                    try:
                        return value()
                    finally:
                        p.flat[j] = v
                numeric = float(Derivative(along, step=h,
                                           method='central')(v))
            worst = max(worst, _rel_err(g.flat[j], numeric))
            n_checked += 1
        max_rel_err[name] = worst
    passed = bool(n_checked > 0 and
                  all(e < tol for e in max_rel_err.values()))
    return GradcheckReport(max_rel_err, n_checked, n_skipped, passed)


def _freeze_dropouts(layer, shape, rs):
    frozen = []
    if isinstance(layer, Dropout) and not layer.frozen:
        layer.freeze(rs.random(shape) >= layer.rate)
        frozen.append(layer)
    return frozen


def check_layer(layer, x, random_state=None, h=1e-5, tol=1e-4, n_coord=200,
                check_inputs=True, **kwargs):
    """
    Check a layer on `f = sum(R * layer(x))` in train mode, with a random
    fixed projection `R`.

    An unfrozen Dropout gets a drawn mask for the duration of the check. Input
    gradients are checked under the name `'input'` (`'input[i]'` for the
    parts of a Concat).
    """
    if not isinstance(layer, Layer):
        raise ValueError('layer should be a Layer.')
    rs = check_state(random_state)
    if isinstance(x, (list, tuple)):
        xs = [np.array(xi, dtype=np.float64) for xi in x]
        x_in = xs
    else:
        xs = [np.array(x, dtype=np.float64)]
        x_in = xs[0]
    if any(p.dtype != np.float64 for p in layer.params.values()):
        raise ValueError('gradient checks need a float64 layer.')
    frozen = _freeze_dropouts(layer, np.shape(x_in), rs)
    try:
        out = layer.forward(x_in, 'train')
        proj = rs.standard_normal(np.shape(out))
        dx = layer.backward(proj)
        params = OrderedDict(layer.params)
        grads = OrderedDict((k, np.copy(g)) for k, g in layer.grads.items())
        if check_inputs:
            dxs = dx if isinstance(dx, list) else [dx]
            if len(xs) == 1 and not isinstance(x, (list, tuple)):
                params['input'] = xs[0]
                grads['input'] = np.copy(dxs[0])
            else:
                for i, (xi, gi) in enumerate(zip(xs, dxs)):
                    params['input[{}]'.format(i)] = xi
                    grads['input[{}]'.format(i)] = np.copy(gi)

        def fun():
            return np.sum(proj * layer.forward(x_in, 'train'))

        return check_gradients(fun, params, grads, h, tol, n_coord, rs,
                               **kwargs)
    finally:
        for d in frozen:
            d.unfreeze()


def check_loss(n=4, n_labels=5, random_state=None, h=1e-5, tol=1e-4,
               from_logits=True, **kwargs):
    """Check the instance-weighted masked cross-entropy on random data."""
    rs = check_state(random_state)
    codes = rs.integers(-1, 2, size=(n, n_labels))
    labels = LabelMatrix.from_codes(codes)
    weights = rs.uniform(0.5, 2., size=(n, n_labels))
    if from_logits:
        pred = rs.standard_normal((n, n_labels))
        name = 'logits'
    else:
        pred = rs.uniform(0.1, 0.9, size=(n, n_labels))
        name = 'probabilities'
    _, grad = weighted_masked_bce(pred, labels, weights, from_logits)

    def fun():
        return weighted_masked_bce(pred, labels, weights, from_logits)[0]

    return check_gradients(fun, {name: pred}, {name: grad}, h, tol,
                           pred.size, rs, **kwargs)


def _random_batch(model, batch_size, rs):
    c = model.config
    inputs = OrderedDict((m, rs.standard_normal((batch_size,) +
                                                c.input_shape(m)))
                         for m in c.modalities)
    labels = LabelMatrix.from_codes(rs.integers(-1, 2, size=(batch_size,
                                                             c.label_count)))
    return inputs, labels, uniform_weights(labels)


def check_model(model, random_state=None, h=1e-5, tol=1e-4, n_coord=200,
                inputs=None, labels=None, weights=None, batch_size=2,
                **kwargs):
    """
    Check the total training loss (data loss plus penalty) of a float64
    model in infer mode. A random batch with uniform weights is drawn when
    `inputs` is None.
    """
    if model.dtype != np.float64:
        raise ValueError('gradient checks need a float64 model, instead of '
                         '{}.'.format(model.dtype))
    rs = check_state(random_state)
    if inputs is None:
        inputs, labels, weights = _random_batch(model, batch_size, rs)
    elif labels is None:
        raise ValueError('labels should be given together with inputs.')
    elif weights is None:
        weights = uniform_weights(labels)
    model.loss_and_grad(inputs, labels, weights, 'infer')
    params = model.params
    grads = OrderedDict((k, np.copy(g)) for k, g in model.grads.items())

    def fun():
        return model.loss(inputs, labels, weights, 'infer')

    return check_gradients(fun, params, grads, h, tol, n_coord, rs, **kwargs)


def gradcheck(target, random_state=None, h=1e-5, tol=1e-4, n_coord=200,
              x=None, **kwargs):
    """
    Check a layer (on input `x`, or a random one for dense inputs) or a
    model against finite differences.
    """
    from ..core.model import Model
    if isinstance(target, Model):
        return check_model(target, random_state, h, tol, n_coord, **kwargs)
    if isinstance(target, Layer):
        if x is None:
            if not isinstance(target, Dense):
                raise ValueError('x should be given for a {}.'.format(
                    type(target).__name__))
            x = check_state(random_state).standard_normal(
                (2, target.in_units))
        return check_layer(target, x, random_state, h, tol, n_coord,
                           **kwargs)
    raise ValueError('target should be a Layer or a Model, instead of '
                     '{}.'.format(type(target).__name__))


def layer_suite(random_state=0, h=1e-5, tol=1e-4, n_coord=200):
    """
    Check every layer kind on small random float64 inputs, plus both forms
    of the loss.

    Returns
    -------
    OrderedDict
        case name -> GradcheckReport.
    """
    rs = check_state(random_state)
    f64 = np.float64

    def temporal(length=9, channels=3):
        return rs.standard_normal((2, length, channels))

    cases = OrderedDict()
    cases['dense'] = (Dense(4, 3, rs, f64), rs.standard_normal((2, 4)))
    cases['conv_standard'] = (
        conv_layer(ConvSpec(3, 3, 4, 2, 'same', 'standard'), rs, f64),
        temporal())
    cases['conv_standard_valid'] = (
        conv_layer(ConvSpec(4, 3, 2, 1, 'valid', 'standard'), rs, f64),
        temporal())
    cases['conv_depthwise'] = (
        conv_layer(ConvSpec(3, 3, None, 2, 'same', 'depthwise'), rs, f64),
        temporal())
    cases['conv_pointwise'] = (
        conv_layer(ConvSpec(1, 3, 4, 1, 'same', 'pointwise'), rs, f64),
        temporal())
    cases['conv_depthwise_separable'] = (
        conv_layer(ConvSpec(4, 3, 5, 2, 'same', 'depthwise_separable'), rs,
                   f64), temporal())
    cases['relu'] = (ReLU(), rs.standard_normal((3, 5)))
    cases['sigmoid'] = (Sigmoid(), rs.standard_normal((3, 5)))
    cases['dropout'] = (Dropout(0.3), rs.standard_normal((3, 5)))
    cases['global_max_pool'] = (GlobalMaxPool(), temporal())
    cases['global_avg_pool'] = (GlobalAvgPool(), temporal())
    cases['concat'] = (Concat(axis=-1), [rs.standard_normal((2, 3)),
                                         rs.standard_normal((2, 4))])
    cases['concat_time'] = (Concat(axis=1), [temporal(5, 2), temporal(3, 2)])
    cases['flatten'] = (Flatten(), temporal(4, 2))
    reports = OrderedDict()
    for name, (layer, x) in cases.items():
        reports[name] = check_layer(layer, x, rs, h, tol, n_coord)
        logger.info('gradcheck %s: max rel err %.3g over %d coordinate(s)',
                    name, max(reports[name].max_rel_err.values()),
                    reports[name].n_checked)
    reports['loss_logits'] = check_loss(random_state=rs, h=h, tol=tol)
    reports['loss_probabilities'] = check_loss(random_state=rs, h=h, tol=tol,
                                               from_logits=False)
    return reports


def model_suite(random_state=0, config=None, batch_size=2, h=1e-5, tol=1e-4,
                n_coord=200):
    """
    Check the full network, by default the GMP-fusion model over all four
    modalities, in float64.
    """
    from ..core.model import ModelConfig, build
    config = ModelConfig() if config is None else config
    rs = check_state(random_state)
    model = build(config, rs, np.float64)
    report = check_model(model, rs, h, tol, n_coord, batch_size=batch_size)
    logger.info('gradcheck model (%s fusion): max rel err %.3g over %d '
                'coordinate(s)', config.fusion,
                max(report.max_rel_err.values()), report.n_checked)
    return OrderedDict([('model_' + config.fusion, report)])

import numpy as np
import warnings
from scipy.special import expit
from .tensor import DimensionError, NumericalError

__all__ = ['LabelMatrix', 'RegPolicy', 'compute_instance_weights',
           'uniform_weights', 'weighted_masked_bce', 'multitask_loss',
           'regularization_penalty']


class LabelMatrix:
    """
    N x C multi-label targets with an explicit missing mask.

    Parameters
    ----------
    values : array_like of int, shape (N, C)
        Stored 0/1 values. Entries where `present` is False may hold anything.
    present : array_like of bool, shape (N, C)
        False marks a missing label, which is distinct from a negative one.
    """
    def __init__(self, values, present):
        values = np.asarray(values)
        present = np.asarray(present, dtype=bool)
        if values.ndim != 2 or values.shape != present.shape:
            raise DimensionError(
                'values and present should be two N x C arrays of the same '
                'shape, instead of {} and {}.'.format(values.shape,
                                                      present.shape))
        if np.any((values[present] != 0) & (values[present] != 1)):
            raise ValueError('present label values should be 0 or 1.')
        self._values = np.ascontiguousarray(values, dtype=np.int8)
        self._present = np.ascontiguousarray(present)

    @classmethod
    def from_codes(cls, codes):
        """Build from integer codes, where -1 means missing."""
        codes = np.asarray(codes)
        present = codes != -1
        return cls(np.where(present, codes, 0), present)

    @classmethod
    def from_nullable(cls, rows):
        """Build from nested lists of 0, 1 and None (None means missing)."""
        rows = [list(r) for r in rows]
        if not rows:
            raise DimensionError('empty label matrix.')
        if len(set(len(r) for r in rows)) != 1:
            raise DimensionError('label rows should all have the same length.')
        codes = np.array([[-1 if v is None else int(v) for v in r]
                          for r in rows], dtype=np.int64)
        return cls.from_codes(codes)

    @property
    def values(self):
        return self._values

    @property
    def present(self):
        return self._present

    @property
    def shape(self):
        return self._values.shape

    @property
    def n_labels(self):
        return self._values.shape[1]

    def __len__(self):
        return self._values.shape[0]

    def __getitem__(self, index):
        values = self._values[index]
        present = self._present[index]
        if values.ndim != 2:
            raise IndexError('LabelMatrix indexing should select rows.')
        return LabelMatrix(values, present)

    def targets(self, dtype=np.float64):
        """0/1 targets with every missing entry set to 0."""
        return np.where(self._present, self._values, 0).astype(dtype)

    def codes(self):
        return np.where(self._present, self._values, -1).astype(np.int64)

    def to_nullable(self):
        return [[int(v) if p else None for v, p in zip(vr, pr)]
                for vr, pr in zip(self._values, self._present)]

    def class_counts(self):
        """Per-label counts of present positives and present negatives."""
        pos = np.sum(self._present & (self._values == 1), axis=0)
        neg = np.sum(self._present & (self._values == 0), axis=0)
        return pos, neg

    def __eq__(self, other):
        if not isinstance(other, LabelMatrix):
            return NotImplemented
        return (self.shape == other.shape and
                np.array_equal(self._present, other._present) and
                np.array_equal(self.codes(), other.codes()))

    def __repr__(self):
        return 'LabelMatrix(n={}, n_labels={}, missing={:.3f})'.format(
            self.shape[0], self.shape[1], 1. - self._present.mean()
            if self._present.size else 0.)


def compute_instance_weights(labels):
    """
    Inverse class frequency weights, the N x C matrix Psi.

    For label c with P_c present positives, G_c present negatives and
    A_c = P_c + G_c, positives get A_c / (2 P_c), negatives A_c / (2 G_c) and
    missing entries 0. A column lacking one of the two classes gives weight 1
    to its present entries.

    Notes
    -----
    Compute this from the training split only.
    """
    if not isinstance(labels, LabelMatrix):
        raise ValueError('labels should be a LabelMatrix.')
    if labels.shape[0] == 0 or labels.shape[1] == 0:
        raise DimensionError('cannot weight an empty label matrix.')
    pos, neg = labels.class_counts()
    total = pos + neg
    with np.errstate(divide='ignore', invalid='ignore'):
        w_pos = np.where(pos > 0, total / (2. * pos), 1.)
        w_neg = np.where(neg > 0, total / (2. * neg), 1.)
    degenerate = (total > 0) & ((pos == 0) | (neg == 0))
    w_pos[degenerate] = 1.
    w_neg[degenerate] = 1.
    if np.any(degenerate):
        warnings.warn('{} label(s) lack one of the two classes in the '
                      'training split, and get unit weights.'.format(
                          int(degenerate.sum())), RuntimeWarning)
    weights = np.where(labels.values == 1, w_pos, w_neg)
    return np.where(labels.present, weights, 0.)


def uniform_weights(labels):
    """Unit weight on every present entry, i.e. instance weighting off."""
    if not isinstance(labels, LabelMatrix):
        raise ValueError('labels should be a LabelMatrix.')
    return labels.present.astype(np.float64)


def weighted_masked_bce(predictions, labels, weights, from_logits=False,
                        eps=1e-7):
    """
    Instance-weighted binary cross-entropy with missing labels masked out.

    loss = 1 / (N C) sum_{i, c} Psi[i, c] L_ce(p[i, c], y[i, c])

    Parameters
    ----------
    predictions : array_like, shape (N, C)
        Probabilities, or logits if `from_logits` is True.
    labels : LabelMatrix
    weights : array_like, shape (N, C)
        Psi. Missing entries contribute nothing whatever their weight.
    from_logits : bool, optional
        If True, evaluate as `log(1 + e^z) - y z`, and return the gradient with
        respect to the logits. Set to False by default.
    eps : float, optional
        Probability inputs are clipped to `[eps, 1 - eps]`.

    Returns
    -------
    loss : float
    grad : ndarray, shape (N, C)
        Same dtype as `predictions`.
    """
    if not isinstance(labels, LabelMatrix):
        raise ValueError('labels should be a LabelMatrix.')
    pred = np.asarray(predictions)
    if not np.issubdtype(pred.dtype, np.floating):
        pred = pred.astype(np.float64)
    weights = np.asarray(weights)
    if pred.shape != labels.shape or weights.shape != labels.shape:
        raise DimensionError(
            'predictions {}, labels {} and weights {} should share one N x C '
            'shape.'.format(pred.shape, labels.shape, weights.shape))
    if not np.all(np.isfinite(pred)):
        raise NumericalError('non-finite predictions passed to the loss.')
    n_total = pred.size
    if n_total == 0:
        raise DimensionError('cannot evaluate the loss of an empty batch.')
    z = pred.astype(np.float64)
    y = labels.targets()
    psi = np.where(labels.present, weights, 0.)
    if from_logits:
        terms = np.logaddexp(0., z) - y * z
        dterms = expit(z) - y
    else:
        p = np.clip(z, eps, 1. - eps)
        terms = -(y * np.log(p) + (1. - y) * np.log1p(-p))
        dterms = (p - y) / (p * (1. - p))
    loss = float(np.sum(psi * terms) / n_total)
    grad = (psi * dterms / n_total).astype(pred.dtype)
    return loss, grad


def multitask_loss(head_predictions, labels, weights, penalty=0.,
                   from_logits=False):
    """
    Unweighted sum of the per-head losses, plus the regularization penalty.

    `head_predictions` is a dict (or list) of N x C arrays; the returned
    gradients mirror its structure.
    """
    items = (list(head_predictions.items()) if isinstance(head_predictions,
             dict) else list(enumerate(head_predictions)))
    if not items:
        raise ValueError('head_predictions should not be empty.')
    total = float(penalty)
    grads = {}
    for key, pred in items:
        loss, grad = weighted_masked_bce(pred, labels, weights, from_logits)
        total += loss
        grads[key] = grad
    if not isinstance(head_predictions, dict):
        grads = [grads[k] for k, _ in items]
    return total, grads


class RegPolicy:
    """
    Penalty rates: L1 on dense weights and L2 on (depthwise) conv kernels.

    Parameters
    ----------
    l1_rate : float, optional
        Set to `1e-4` by default.
    l2_depthwise_rate : float, optional
        Set to `1e-4` by default.
    apply_l1 : bool, optional
    apply_l2 : bool, optional
    """
    def __init__(self, l1_rate=1e-4, l2_depthwise_rate=1e-4, apply_l1=True,
                 apply_l2=True):
        self.l1_rate = l1_rate
        self.l2_depthwise_rate = l2_depthwise_rate
        self.apply_l1 = apply_l1
        self.apply_l2 = apply_l2

    @property
    def l1_rate(self):
        return self._l1_rate

    @l1_rate.setter
    def l1_rate(self, rate):
        rate = float(rate)
        if not rate >= 0.:
            raise ValueError('l1_rate should be non-negative, instead of '
                             '{}.'.format(rate))
        self._l1_rate = rate

    @property
    def l2_depthwise_rate(self):
        return self._l2_depthwise_rate

    @l2_depthwise_rate.setter
    def l2_depthwise_rate(self, rate):
        rate = float(rate)
        if not rate >= 0.:
            raise ValueError('l2_depthwise_rate should be non-negative, '
                             'instead of {}.'.format(rate))
        self._l2_depthwise_rate = rate

    @property
    def apply_l1(self):
        return self._apply_l1

    @apply_l1.setter
    def apply_l1(self, flag):
        self._apply_l1 = bool(flag)

    @property
    def apply_l2(self):
        return self._apply_l2

    @apply_l2.setter
    def apply_l2(self, flag):
        self._apply_l2 = bool(flag)

    def rate(self, kind):
        if kind == 'l1':
            return self._l1_rate if self._apply_l1 else 0.
        elif kind == 'l2':
            return self._l2_depthwise_rate if self._apply_l2 else 0.
        return 0.

    def __repr__(self):
        return 'RegPolicy(l1_rate={}, l2_depthwise_rate={})'.format(
            self.rate('l1'), self.rate('l2'))


def regularization_penalty(params, penalties, policy, grads=None):
    """
    l1_rate * sum |w| over L1-flagged weights plus
    l2_depthwise_rate * sum w^2 over L2-flagged kernels.

    If `grads` is given, the penalty gradients are added to it in place. The
    subgradient of |w| at 0 is taken as 0.
    """
    if not isinstance(policy, RegPolicy):
        raise ValueError('policy should be a RegPolicy.')
    total = 0.
    for name, w in params.items():
        kind = penalties.get(name)
        rate = policy.rate(kind)
        if rate == 0.:
            continue
        if kind == 'l1':
            total += rate * float(np.sum(np.abs(w), dtype=np.float64))
            if grads is not None:
                grads[name] += (rate * np.sign(w)).astype(grads[name].dtype)
        else:
            total += rate * float(np.sum(np.square(w), dtype=np.float64))
            if grads is not None:
                grads[name] += (2. * rate * w).astype(grads[name].dtype)
    return total

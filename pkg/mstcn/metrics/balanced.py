import numpy as np
import warnings
from collections import namedtuple, OrderedDict
from ..core.objective import LabelMatrix
from ..core.tensor import DimensionError

__all__ = ['ConfusionCounts', 'LabelScores', 'confusion', 'balanced_accuracy',
           'FoldReport', 'Summary', 'aggregate']


ConfusionCounts = namedtuple('ConfusionCounts', ['tp', 'fp', 'tn', 'fn'])
ConfusionCounts.__doc__ = """Per-label counts over present entries only."""


LabelScores = namedtuple('LabelScores', ['sensitivity', 'specificity', 'ba'])


def _check_threshold(threshold):
    threshold = float(threshold)
    if not 0. < threshold < 1.:
        raise ValueError('threshold should be in (0, 1), instead of '
                         '{}.'.format(threshold))
    return threshold


def confusion(predictions, labels, threshold=0.5):
    """
    Per-label confusion counts; a prediction >= threshold counts as positive.

    Parameters
    ----------
    predictions : array_like, shape (N, C)
        Probabilities.
    labels : LabelMatrix
        Missing entries are left out of every count.
    threshold : float, optional
        Set to 0.5 by default.

    Returns
    -------
    ConfusionCounts
        Four int64 arrays of length C.
    """
    if not isinstance(labels, LabelMatrix):
        raise ValueError('labels should be a LabelMatrix.')
    threshold = _check_threshold(threshold)
    pred = np.asarray(predictions)
    if pred.shape != labels.shape:
        raise DimensionError('predictions {} and labels {} should have the '
                             'same shape.'.format(pred.shape, labels.shape))
    positive = pred >= threshold
    present = labels.present
    truth = labels.values == 1
    return ConfusionCounts(
        tp=np.sum(present & truth & positive, axis=0, dtype=np.int64),
        fp=np.sum(present & ~truth & positive, axis=0, dtype=np.int64),
        tn=np.sum(present & ~truth & ~positive, axis=0, dtype=np.int64),
        fn=np.sum(present & truth & ~positive, axis=0, dtype=np.int64))


def balanced_accuracy(counts):
    """
    Sensitivity, specificity and their mean for every label.

    A label without present positives (negatives) has an undefined
    sensitivity (specificity), reported as NaN; its ba is then NaN too.
    """
    if not isinstance(counts, ConfusionCounts):
        raise ValueError('counts should be a ConfusionCounts.')
    tp, fp, tn, fn = (np.asarray(c, dtype=np.float64) for c in counts)
    with np.errstate(divide='ignore', invalid='ignore'):
        sens = np.where(tp + fn > 0, tp / (tp + fn), np.nan)
        spec = np.where(tn + fp > 0, tn / (tn + fp), np.nan)
    return LabelScores(sens, spec, (sens + spec) / 2.)


def _nanmean(x, axis=None):
    x = np.asarray(x, dtype=np.float64)
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', RuntimeWarning)
        return np.nanmean(x, axis=axis)


class FoldReport:
    """
    Per-label scores of one evaluation, plus macro averages over the labels
    where each score is defined.

    Parameters
    ----------
    counts : ConfusionCounts
    label_names : sequence of str or None, optional
    """
    def __init__(self, counts, label_names=None):
        self._counts = ConfusionCounts(*(np.asarray(c, dtype=np.int64)
                                         for c in counts))
        self._scores = balanced_accuracy(self._counts)
        n_labels = self._counts.tp.shape[0]
        if label_names is not None:
            label_names = [str(s) for s in label_names]
            if len(label_names) != n_labels:
                raise ValueError('got {} label names for {} '
                                 'labels.'.format(len(label_names), n_labels))
        self._label_names = label_names
        if self.n_excluded:
            warnings.warn('{} of {} label(s) lack positives or negatives and '
                          'are left out of the macro ba.'.format(
                              self.n_excluded, n_labels), RuntimeWarning)

    @classmethod
    def from_predictions(cls, predictions, labels, threshold=0.5,
                         label_names=None):
        return cls(confusion(predictions, labels, threshold), label_names)

    @property
    def counts(self):
        return self._counts

    @property
    def n_labels(self):
        return self._counts.tp.shape[0]

    @property
    def label_names(self):
        return self._label_names

    @property
    def n_present(self):
        c = self._counts
        return c.tp + c.fp + c.tn + c.fn

    @property
    def sensitivity(self):
        return self._scores.sensitivity

    @property
    def specificity(self):
        return self._scores.specificity

    @property
    def ba(self):
        return self._scores.ba

    @property
    def n_excluded(self):
        return int(np.sum(np.isnan(self._scores.ba)))

    @property
    def macro(self):
        return OrderedDict([('sensitivity', float(_nanmean(self.sensitivity))),
                            ('specificity', float(_nanmean(self.specificity))),
                            ('ba', float(_nanmean(self.ba)))])

    def to_dict(self):
        return OrderedDict([
            ('n_labels', self.n_labels),
            ('label_names', self._label_names),
            ('macro', self.macro),
            ('n_excluded', self.n_excluded),
            ('labels', _label_rows(self.n_present, self.sensitivity,
                                   self.specificity, self.ba,
                                   self._label_names)),
        ])

    def __repr__(self):
        m = self.macro
        return 'FoldReport(ba={:.3f}, sensitivity={:.3f}, specificity=' \
               '{:.3f}, n_excluded={})'.format(m['ba'], m['sensitivity'],
                                               m['specificity'],
                                               self.n_excluded)


def _none_if_nan(x):
    x = float(x)
    return None if np.isnan(x) else x


def _label_rows(n_present, sens, spec, ba, names):
    rows = []
    for i in range(len(ba)):
        row = OrderedDict([('label_id', i)])
        if names is not None:
            row['label_name'] = names[i]
        row['n_present'] = int(n_present[i])
        row['sensitivity'] = _none_if_nan(sens[i])
        row['specificity'] = _none_if_nan(spec[i])
        row['ba'] = _none_if_nan(ba[i])
        rows.append(row)
    return rows


class Summary:
    """
    Cross-fold summary: per-label fold averages, their macro mean, and the
    population standard deviation of the per-fold macro scores.
    """
    def __init__(self, sensitivity, specificity, ba, n_present, fold_macro,
                 label_names=None):
        self.sensitivity = np.asarray(sensitivity, dtype=np.float64)
        self.specificity = np.asarray(specificity, dtype=np.float64)
        self.ba = np.asarray(ba, dtype=np.float64)
        self.n_present = np.asarray(n_present, dtype=np.int64)
        self.fold_macro = [OrderedDict(m) for m in fold_macro]
        self.label_names = label_names

    @property
    def n_folds(self):
        return len(self.fold_macro)

    @property
    def n_excluded(self):
        return int(np.sum(np.isnan(self.ba)))

    @property
    def macro(self):
        return OrderedDict([('sensitivity', float(_nanmean(self.sensitivity))),
                            ('specificity', float(_nanmean(self.specificity))),
                            ('ba', float(_nanmean(self.ba)))])

    @property
    def sd(self):
        out = OrderedDict()
        for key in ('sensitivity', 'specificity', 'ba'):
            values = np.array([m[key] for m in self.fold_macro])
            values = values[~np.isnan(values)]
            out[key] = float(np.std(values)) if values.size else float('nan')
        return out

    def to_dict(self):
        return OrderedDict([
            ('n_folds', self.n_folds),
            ('n_labels', len(self.ba)),
            ('label_names', self.label_names),
            ('macro', self.macro),
            ('sd', self.sd),
            ('fold_macro', self.fold_macro),
            ('n_excluded', self.n_excluded),
            ('labels', _label_rows(self.n_present, self.sensitivity,
                                   self.specificity, self.ba,
                                   self.label_names)),
        ])

    def __repr__(self):
        m, s = self.macro, self.sd
        return 'Summary(ba={:.3f} (+- {:.3f}), n_folds={})'.format(
            m['ba'], s['ba'], self.n_folds)


def aggregate(reports):
    """
    Average each label over the folds where it is defined, then take the
    unweighted mean over labels. The spread is the population sd of the
    per-fold macro scores.
    """
    reports = list(reports)
    if not reports or not all(isinstance(r, FoldReport) for r in reports):
        raise ValueError('reports should be a non-empty list of FoldReport.')
    n_labels = reports[0].n_labels
    if any(r.n_labels != n_labels for r in reports):
        raise DimensionError('all reports should cover the same labels.')
    return Summary(
        sensitivity=_nanmean([r.sensitivity for r in reports], axis=0),
        specificity=_nanmean([r.specificity for r in reports], axis=0),
        ba=_nanmean([r.ba for r in reports], axis=0),
        n_present=np.sum([r.n_present for r in reports], axis=0),
        fold_macro=[r.macro for r in reports],
        label_names=reports[0].label_names)

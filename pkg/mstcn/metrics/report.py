import json
import os
import numpy as np
from collections import OrderedDict
from .balanced import FoldReport, Summary

__all__ = ['TABLE_COLUMNS', 'format_score', 'format_table', 'format_summary',
           'format_comparison', 'write_report']


TABLE_COLUMNS = ('label_id', 'n_present', 'sensitivity', 'specificity', 'ba')


def _cell(x):
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return 'NA'
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return '{:.4f}'.format(float(x))


def format_score(mean, sd=None):
    """E.g. `0.750 (± 0.012)`."""
    if sd is None:
        return '{:.3f}'.format(mean)
    return '{:.3f} (± {:.3f})'.format(mean, sd)


def format_table(report):
    """
    Tab-separated per-label table with the columns of `TABLE_COLUMNS`.
    Undefined scores are written as `NA`.
    """
    if not isinstance(report, (FoldReport, Summary)):
        raise ValueError('report should be a FoldReport or a Summary.')
    lines = ['\t'.join(TABLE_COLUMNS)]
    for i in range(len(report.ba)):
        lines.append('\t'.join([
            str(i), _cell(int(report.n_present[i])),
            _cell(report.sensitivity[i]), _cell(report.specificity[i]),
            _cell(report.ba[i])]))
    return '\n'.join(lines) + '\n'


def _finite_or_none(x):
    if isinstance(x, dict):
        return OrderedDict((k, _finite_or_none(v)) for k, v in x.items())
    if isinstance(x, (list, tuple)):
        return [_finite_or_none(v) for v in x]
    if isinstance(x, (float, np.floating)):
        return None if np.isnan(x) else float(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def format_summary(report, **extra):
    """Structured JSON document of a FoldReport or Summary."""
    if not isinstance(report, (FoldReport, Summary)):
        raise ValueError('report should be a FoldReport or a Summary.')
    d = report.to_dict()
    d.update(extra)
    return json.dumps(_finite_or_none(d), indent=2, allow_nan=False) + '\n'


def format_comparison(rows):
    """
    Ablation table: one line per grid cell with its descriptor and macro
    `mean (± sd)` scores.

    Parameters
    ----------
    rows : list of (str, Summary)
    """
    lines = ['\t'.join(('cell', 'ba', 'sensitivity', 'specificity',
                        'n_excluded'))]
    for descriptor, summary in rows:
        m, s = summary.macro, summary.sd
        lines.append('\t'.join(
            [descriptor] + [format_score(m[k], s[k]) for k in
                            ('ba', 'sensitivity', 'specificity')] +
            [str(summary.n_excluded)]))
    return '\n'.join(lines) + '\n'


def write_report(report, directory, stem='report', **extra):
    """Write `<stem>.tsv` and `<stem>.json` into `directory`."""
    os.makedirs(directory, exist_ok=True)
    paths = OrderedDict([('table', os.path.join(directory, stem + '.tsv')),
                         ('summary', os.path.join(directory, stem + '.json'))])
    with open(paths['table'], 'w') as f:
        f.write(format_table(report))
    with open(paths['summary'], 'w') as f:
        f.write(format_summary(report, **extra))
    return paths

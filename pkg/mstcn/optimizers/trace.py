import json
import numpy as np
from collections import namedtuple

__all__ = ['TrainRecord', 'TrainTrace', 'read_log']


record_items = ('step', 'wall_ms', 'loss', 'batch_loss', 'val_ba')


TrainRecord = namedtuple('TrainRecord', record_items)


def _none_or_float(x):
    return None if x is None else float(x)


class TrainTrace:
    """Records taken at the evaluation cadence of one training run."""

    def __init__(self, records=None):
        self._records = []
        for r in records or []:
            self.update(r)

    def update(self, record):
        if not isinstance(record, TrainRecord):
            raise ValueError('record should be a TrainRecord.')
        if self._records and record.step <= self._records[-1].step:
            raise ValueError('records should have increasing steps, but got '
                             '{} after {}.'.format(record.step,
                                                   self._records[-1].step))
        self._records.append(record)

    @property
    def records(self):
        return list(self._records)

    @property
    def n_record(self):
        return len(self._records)

    @property
    def last(self):
        return self._records[-1] if self._records else None

    def get(self, item):
        if item not in record_items:
            raise ValueError('item should be one of {}, instead of '
                             '"{}".'.format(record_items, item))
        return np.array([np.nan if getattr(r, item) is None else
                         getattr(r, item) for r in self._records])

    @property
    def steps(self):
        return np.array([r.step for r in self._records], dtype=np.int64)

    @property
    def loss(self):
        return self.get('loss')

    @staticmethod
    def format_record(record):
        return json.dumps(dict(
            step=int(record.step), wall_ms=_none_or_float(record.wall_ms),
            loss=float(record.loss),
            batch_loss=_none_or_float(record.batch_loss),
            val_ba=_none_or_float(record.val_ba)))

    def lines(self, include_wall=True):
        out = []
        for r in self._records:
            if not include_wall:
                r = r._replace(wall_ms=None)
            out.append(self.format_record(r))
        return out

    def __len__(self):
        return len(self._records)

    def __repr__(self):
        return 'TrainTrace(n_record={}, last={})'.format(len(self), self.last)


def read_log(path):
    """Parse a training log written one JSON record per line."""
    records = []
    with open(path) as f:
        for i, line in enumerate(f):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                records.append(TrainRecord(*(d.get(k) for k in record_items)))
            except (ValueError, TypeError):
                raise ValueError('line {} of {} is not a training '
                                 'record.'.format(i + 1, path))
    return TrainTrace(records)

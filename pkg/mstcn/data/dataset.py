import json
import logging
import os
import warnings
import numpy as np
from collections import OrderedDict
from .preprocess import (DataError, Instance, Discard, preprocess,
                         IMU_LENGTH, MFCC_LENGTH)
from ..core.objective import LabelMatrix
from ..core.tensor import FormatError, blob_save, blob_load

__all__ = ['Dataset', 'load_dataset', 'save_dataset', 'read_header',
           'FORMAT_VERSION', 'HEADER_NAME', 'RECORDS_NAME', 'BLOB_DIR']


logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
HEADER_NAME = 'dataset.json'
RECORDS_NAME = 'instances.jsonl'
BLOB_DIR = 'blobs'

# model modality -> dataset column
_COLUMNS = OrderedDict([('acc', 'acc'), ('gyro', 'gyro'), ('aud', 'mfcc'),
                        ('ps', 'ps')])


class Dataset:
    """
    Columnar store of preprocessed instances.

    Parameters
    ----------
    acc, gyro : array_like, shape (N, L, 3)
    mfcc : array_like, shape (N, F, 13)
    ps : array_like, shape (N, W)
    ids, users : sequence of str, length N
    labels : LabelMatrix
    label_names : sequence of str or None, optional
    """
    def __init__(self, acc, gyro, mfcc, ps, ids, users, labels,
                 label_names=None):
        self._acc = np.asarray(acc, dtype=np.float32)
        self._gyro = np.asarray(gyro, dtype=np.float32)
        self._mfcc = np.asarray(mfcc, dtype=np.float32)
        self._ps = np.asarray(ps, dtype=np.uint8)
        self._ids = np.asarray([str(i) for i in ids])
        self._users = np.asarray([str(u) for u in users])
        if not isinstance(labels, LabelMatrix):
            raise ValueError('labels should be a LabelMatrix.')
        self._labels = labels
        n = len(self._ids)
        for what, a, ndim in (('acc', self._acc, 3), ('gyro', self._gyro, 3),
                              ('mfcc', self._mfcc, 3), ('ps', self._ps, 2)):
            if a.ndim != ndim or a.shape[0] != n:
                raise DataError('{} should be a {}-d array with {} rows, '
                                'instead of shape {}.'.format(what, ndim, n,
                                                              a.shape))
        if len(self._users) != n or len(labels) != n:
            raise DataError('ids, users and labels should all have {} '
                            'rows.'.format(n))
        if label_names is None:
            label_names = ['label_{}'.format(i) for i in
                           range(labels.n_labels)]
        label_names = [str(s) for s in label_names]
        if len(label_names) != labels.n_labels:
            raise DataError('got {} label names for {} labels.'.format(
                len(label_names), labels.n_labels))
        self._label_names = label_names

    @classmethod
    def from_instances(cls, instances, n_labels, ps_width, label_names=None):
        """Stack preprocessed `Instance` records."""
        instances = list(instances)
        if not instances:
            raise DataError('no instances to build a dataset from.')
        codes = np.array([i.labels for i in instances], dtype=np.int64)
        if codes.ndim != 2 or codes.shape[1] != n_labels:
            raise DataError('every instance should have {} '
                            'labels.'.format(n_labels))
        return cls(acc=np.stack([i.acc for i in instances]),
                   gyro=np.stack([i.gyro for i in instances]),
                   mfcc=np.stack([i.mfcc for i in instances]),
                   ps=np.stack([i.ps for i in instances]).reshape(
                       len(instances), ps_width),
                   ids=[i.instance_id for i in instances],
                   users=[i.user_id for i in instances],
                   labels=LabelMatrix.from_codes(codes),
                   label_names=label_names)

    def __len__(self):
        return len(self._ids)

    @property
    def acc(self):
        return self._acc

    @property
    def gyro(self):
        return self._gyro

    @property
    def mfcc(self):
        return self._mfcc

    @property
    def ps(self):
        return self._ps

    @property
    def ids(self):
        return self._ids

    @property
    def users(self):
        return self._users

    @property
    def labels(self):
        return self._labels

    @property
    def label_names(self):
        return list(self._label_names)

    @property
    def n_labels(self):
        return self._labels.n_labels

    @property
    def ps_width(self):
        return self._ps.shape[1]

    @property
    def unique_users(self):
        return sorted(set(self._users.tolist()))

    @property
    def header(self):
        return OrderedDict([('format_version', FORMAT_VERSION),
                            ('n_labels', self.n_labels),
                            ('ps_width', self.ps_width),
                            ('label_names', self.label_names)])

    def column(self, modality):
        try:
            return getattr(self, '_' + _COLUMNS[modality])
        except KeyError:
            raise ValueError('unknown modality "{}".'.format(modality))

    def take(self, index, modalities=None):
        """Per-modality model inputs for the rows `index`."""
        index = np.asarray(index, dtype=np.int64)
        if modalities is None:
            modalities = list(_COLUMNS)
        return OrderedDict((m, self.column(m)[index]) for m in modalities)

    def subset(self, index):
        index = np.asarray(index, dtype=np.int64)
        return Dataset(self._acc[index], self._gyro[index], self._mfcc[index],
                       self._ps[index], self._ids[index], self._users[index],
                       self._labels[index], self._label_names)

    def user_indices(self, users):
        """Sorted row indices of the instances belonging to `users`."""
        mask = np.isin(self._users, np.asarray([str(u) for u in users]))
        return np.flatnonzero(mask)

    def instances(self):
        codes = self._labels.codes()
        for i in range(len(self)):
            yield Instance(self._ids[i], self._users[i], self._acc[i],
                           self._gyro[i], self._mfcc[i], self._ps[i],
                           codes[i])

    def __repr__(self):
        return 'Dataset(n={}, n_users={}, n_labels={}, ps_width={})'.format(
            len(self), len(self.unique_users), self.n_labels, self.ps_width)


def read_header(path):
    hpath = os.path.join(path, HEADER_NAME)
    try:
        with open(hpath) as f:
            header = json.load(f)
    except FileNotFoundError:
        raise DataError('{} has no {}.'.format(path, HEADER_NAME))
    except ValueError:
        raise DataError('{} is not valid JSON.'.format(hpath))
    try:
        assert header['format_version'] == FORMAT_VERSION
        n_labels = int(header['n_labels'])
        ps_width = int(header['ps_width'])
        label_names = [str(s) for s in header['label_names']]
        assert n_labels >= 1 and ps_width >= 1
        assert len(label_names) == n_labels
    except (KeyError, TypeError, ValueError, AssertionError):
        raise DataError('{} is not a version {} dataset header.'.format(
            hpath, FORMAT_VERSION))
    return n_labels, ps_width, label_names


def _read_record(path, line, lineno, n_labels):
    try:
        rec = json.loads(line)
        iid, user = str(rec['id']), str(rec['user'])
        labels = [-1 if v is None else int(v) for v in rec['labels']]
        files = rec['files']
        blobs = {k: blob_load(os.path.join(path, files[k])) for k in
                 ('acc', 'gyro', 'mfcc', 'ps')}
    except (ValueError, TypeError, KeyError) as e:
        if isinstance(e, FormatError):
            raise DataError('line {} of {}: {}'.format(lineno, RECORDS_NAME,
                                                       e))
        raise DataError('line {} of {} is not a valid instance '
                        'record.'.format(lineno, RECORDS_NAME))
    except FileNotFoundError as e:
        raise DataError('line {} of {} references a missing blob: '
                        '{}.'.format(lineno, RECORDS_NAME, e.filename))
    if len(labels) != n_labels:
        raise DataError('line {} of {} has {} labels, the header declares '
                        '{}.'.format(lineno, RECORDS_NAME, len(labels),
                                     n_labels))
    return Instance(iid, user, blobs['acc'],
                    blobs['gyro'], blobs['mfcc'], blobs['ps'],
                    np.asarray(labels, dtype=np.int64))


def load_dataset(path, imu_length=IMU_LENGTH, mfcc_length=MFCC_LENGTH):
    """
    Read and preprocess a dataset directory.

    Instances whose MFCC sequence is too short are dropped with a
    RuntimeWarning. The directory is never modified.
    """
    n_labels, ps_width, label_names = read_header(path)
    kept = []
    discarded = []
    try:
        f = open(os.path.join(path, RECORDS_NAME))
    except FileNotFoundError:
        raise DataError('{} has no {}.'.format(path, RECORDS_NAME))
    with f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            raw = _read_record(path, line, lineno, n_labels)
            out = preprocess(raw, imu_length, mfcc_length, ps_width=ps_width)
            if isinstance(out, Discard):
                discarded.append(out)
            else:
                kept.append(out)
    if discarded:
        warnings.warn('{} instance(s) discarded while loading {}: {}.'.format(
            len(discarded), path, sorted(set(d.reason for d in discarded))),
            RuntimeWarning)
    logger.info('loaded %d instance(s) from %s, discarded %d', len(kept),
                path, len(discarded))
    if not kept:
        raise DataError('no usable instances in {}.'.format(path))
    return Dataset.from_instances(kept, n_labels, ps_width, label_names)


def save_dataset(instances, path, n_labels, ps_width, label_names=None):
    """
    Write raw or preprocessed instances in the dataset directory format.

    Output is a pure function of the inputs, so equal inputs give
    byte-identical directories.
    """
    if label_names is None:
        label_names = ['label_{}'.format(i) for i in range(n_labels)]
    if len(label_names) != n_labels:
        raise DataError('got {} label names for {} labels.'.format(
            len(label_names), n_labels))
    os.makedirs(os.path.join(path, BLOB_DIR), exist_ok=True)
    header = OrderedDict([('format_version', FORMAT_VERSION),
                          ('n_labels', int(n_labels)),
                          ('ps_width', int(ps_width)),
                          ('label_names', [str(s) for s in label_names])])
    with open(os.path.join(path, HEADER_NAME), 'w') as f:
        json.dump(header, f, indent=2)
        f.write('\n')
    n = 0
    with open(os.path.join(path, RECORDS_NAME), 'w') as f:
        for i, inst in enumerate(instances):
            files = OrderedDict()
            for key, dtype in (('acc', np.float32), ('gyro', np.float32),
                               ('mfcc', np.float32), ('ps', np.uint8)):
                fname = '{}/{:06d}_{}.blob'.format(BLOB_DIR, i, key)
                blob_save(os.path.join(path, fname),
                          np.asarray(getattr(inst, key), dtype=dtype))
                files[key] = fname
            labels = [None if int(v) == -1 else int(v) for v in inst.labels]
            if len(labels) != n_labels:
                raise DataError('instance {} has {} labels instead of '
                                '{}.'.format(inst.instance_id, len(labels),
                                             n_labels))
            rec = OrderedDict([('id', str(inst.instance_id)),
                               ('user', str(inst.user_id)),
                               ('labels', labels), ('files', files)])
            f.write(json.dumps(rec) + '\n')
            n += 1
    logger.info('wrote %d instance(s) to %s', n, path)
    return n

import queue
import threading
import numpy as np
from collections import namedtuple
from .preprocess import DataError
from ..utils.random import derive_state, state_seed

__all__ = ['Batch', 'Batcher']


Batch = namedtuple('Batch', ['step', 'indices', 'inputs', 'labels',
                             'weights'])


class Batcher:
    """
    Mini-batches drawn without replacement, reshuffled every epoch.

    The order of epoch `e` depends only on `(seed, e)`, so `batch(step)` is
    random-access and a resumed run sees the same batches.

    Parameters
    ----------
    dataset : Dataset
    batch_size : int, optional
        Set to 100 by default. The last batch of an epoch may be shorter.
    random_state : int or None, optional
    indices : array_like of int or None, optional
        Rows of `dataset` to draw from. Uses all rows if None.
    weights : array_like or None, optional
        Psi rows aligned with `indices`.
    modalities : sequence of str or None, optional
    prefetch : int, optional
        If positive, `iterate` materializes up to this many batches ahead in a
        background thread. Set to 0 by default.
    """
    def __init__(self, dataset, batch_size=100, random_state=None,
                 indices=None, weights=None, modalities=None, prefetch=0):
        self._dataset = dataset
        self._indices = (np.arange(len(dataset)) if indices is None else
                         np.asarray(indices, dtype=np.int64))
        if self._indices.size == 0:
            raise DataError('cannot batch an empty dataset.')
        try:
            self._batch_size = int(batch_size)
            assert self._batch_size >= 1
        except (TypeError, ValueError, AssertionError):
            raise ValueError('batch_size should be a positive int, instead of '
                             '{}.'.format(batch_size))
        if weights is not None:
            weights = np.asarray(weights)
            if weights.shape != (self._indices.size, dataset.n_labels):
                raise ValueError('weights should have shape {}, instead of '
                                 '{}.'.format((self._indices.size,
                                               dataset.n_labels),
                                              weights.shape))
        self._weights = weights
        self._seed = state_seed(random_state)
        self._modalities = modalities
        self._prefetch = max(int(prefetch), 0)
        self._order_cache = (None, None)

    @property
    def n_instance(self):
        return self._indices.size

    @property
    def batch_size(self):
        return self._batch_size

    @property
    def batches_per_epoch(self):
        return -(-self.n_instance // self._batch_size)

    def epoch_order(self, epoch):
        """Positions into `indices`, in the drawing order of `epoch`."""
        if self._order_cache[0] != epoch:
            order = derive_state(self._seed, 0, epoch).permutation(
                self.n_instance)
            self._order_cache = (epoch, order)
        return self._order_cache[1]

    def positions(self, step):
        epoch, j = divmod(int(step), self.batches_per_epoch)
        return self.epoch_order(epoch)[j * self._batch_size:
                                       (j + 1) * self._batch_size]

    def batch_indices(self, step):
        return self._indices[self.positions(step)]

    def batch(self, step):
        pos = self.positions(step)
        rows = self._indices[pos]
        return Batch(step=int(step), indices=rows,
                     inputs=self._dataset.take(rows, self._modalities),
                     labels=self._dataset.labels[rows],
                     weights=(None if self._weights is None else
                              self._weights[pos]))

    def epoch(self, e):
        start = int(e) * self.batches_per_epoch
        return self.iterate(start, start + self.batches_per_epoch)

    def iterate(self, start, stop):
        """Batches for the steps `start, ..., stop - 1`."""
        if self._prefetch == 0:
            for step in range(start, stop):
                yield self.batch(step)
            return
        q = queue.Queue(maxsize=self._prefetch)
        done = threading.Event()
        sentinel = object()

        def put(item):
            # give up once the consumer has gone away
            while not done.is_set():
                try:
                    q.put(item, timeout=0.1)
                    return True
                except queue.Full:
                    pass
            return False

        def producer():
            try:
                for step in range(start, stop):
                    if not put(self.batch(step)):
                        return
                put(sentinel)
            except BaseException as e:
                put(e)

        worker = threading.Thread(target=producer, daemon=True)
        worker.start()
        try:
            while True:
                item = q.get()
                if item is sentinel:
                    break
                if isinstance(item, BaseException):
                    raise item
                yield item
        finally:
            done.set()
            worker.join()

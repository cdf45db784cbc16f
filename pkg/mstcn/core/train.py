import logging
import time
import numpy as np
from collections import namedtuple, OrderedDict
from threadpoolctl import threadpool_limits
from .checkpoint import checkpoint_save
from .model import Model, ConfigError, canonical_modalities
from .objective import compute_instance_weights, uniform_weights
from .tensor import NumericalError
from ..data.batching import Batcher
from ..metrics.balanced import FoldReport
from ..optimizers.adam import Adam
from ..optimizers.trace import TrainRecord, TrainTrace
from ..utils.random import derive_state, state_seed

__all__ = ['TrainPlan', 'TrainResult', 'train', 'predict', 'evaluate',
           'evaluate_loss', 'instance_weights']


logger = logging.getLogger(__name__)


TrainResult = namedtuple('TrainResult', ['model', 'trace', 'optimizer'])


class TrainPlan:
    """
    How long and how to optimize.

    Parameters
    ----------
    iterations : int, optional
        Number of Adam steps. Set to 15000 by default.
    batch_size : int, optional
        Set to 100 by default.
    lr : float or None, optional
        Adam step size. If None, use `config.learning_rate` of the model, i.e.
        `1e-4`, or `3e-4` for the multi-task network.
    eval_every : int, optional
        Record cadence in steps. Set to 500 by default.
    seed : int, optional
        Seeds the batch order and the dropout masks.
    weighting : bool, optional
        Use instance weights (True) or unit weights on present labels.
    monitor_size : int, optional
        The recorded loss is evaluated on the first `monitor_size` training
        instances. Set to 500 by default.
    prefetch : int, optional
        Batches prepared ahead by a background thread. Set to 0 by default.
    """
    FIELDS = OrderedDict([
        ('iterations', 15000),
        ('batch_size', 100),
        ('lr', None),
        ('eval_every', 500),
        ('seed', 0),
        ('weighting', True),
        ('monitor_size', 500),
        ('prefetch', 0),
    ])

    def __init__(self, **kwargs):
        unknown = [k for k in kwargs if k not in self.FIELDS]
        if unknown:
            raise ConfigError('unknown TrainPlan field(s) {}.'.format(
                sorted(unknown)))
        values = OrderedDict(self.FIELDS)
        values.update(kwargs)
        for key, low in (('iterations', 0), ('batch_size', 1),
                         ('eval_every', 1), ('seed', 0), ('monitor_size', 1),
                         ('prefetch', 0)):
            try:
                value = int(values[key])
                assert value >= low and value == values[key]
            except (TypeError, ValueError, AssertionError):
                raise ConfigError('{} should be an int >= {}, instead of '
                                  '{}.'.format(key, low, values[key]))
            setattr(self, key, value)
        lr = values['lr']
        if lr is not None:
            try:
                lr = float(lr)
                assert lr > 0.
            except (TypeError, ValueError, AssertionError):
                raise ConfigError('lr should be a positive float or None, '
                                  'instead of {}.'.format(values['lr']))
        self.lr = lr
        self.weighting = bool(values['weighting'])

    def resolve_lr(self, config):
        return config.learning_rate if self.lr is None else self.lr

    def record_steps(self, start=0):
        """Steps at which a record is taken, after the `start` step."""
        steps = list(range(0, self.iterations + 1, self.eval_every))
        if steps[-1] != self.iterations:
            steps.append(self.iterations)
        return [t for t in steps if t > start or (t == 0 and start == 0)]

    def to_dict(self):
        return OrderedDict((k, getattr(self, k)) for k in self.FIELDS)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def replace(self, **changes):
        d = self.to_dict()
        d.update(changes)
        return TrainPlan(**d)

    def __eq__(self, other):
        if not isinstance(other, TrainPlan):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self):
        return 'TrainPlan(iterations={}, batch_size={}, lr={}, seed={})'.format(
            self.iterations, self.batch_size, self.lr, self.seed)


def instance_weights(labels, weighting=True):
    """Psi for a training split, or unit weights if weighting is off."""
    return compute_instance_weights(labels) if weighting else \
        uniform_weights(labels)


def _chunks(indices, size):
    for i in range(0, len(indices), size):
        yield indices[i:i + size]


def predict(model, dataset, indices=None, batch_size=100, subset=None):
    """
    Probabilities for the rows `indices`, an N x label_count float64 array.

    Multi-task models average their heads over `subset` (all configured
    modalities if None).
    """
    if not isinstance(model, Model):
        raise ValueError('model should be a Model.')
    indices = (np.arange(len(dataset)) if indices is None else
               np.asarray(indices, dtype=np.int64))
    if subset is None:
        modalities = model.config.modalities
    else:
        modalities = canonical_modalities(subset)
        if not model.multi_task and modalities != model.config.modalities:
            raise ConfigError(
                'a single-task model serves exactly its modalities {}, '
                'instead of {}; only multi-task models accept a '
                'subset.'.format(list(model.config.modalities),
                                   list(modalities)))
    out = []
    with threadpool_limits(1):
        for rows in _chunks(indices, int(batch_size)):
            inputs = dataset.take(rows, modalities)
            if model.multi_task:
                p = model.predict_missing(inputs, modalities)
            else:
                p = model.forward(inputs, 'infer')
            out.append(np.asarray(p, dtype=np.float64))
    if not out:
        return np.zeros((0, model.config.label_count))
    return np.concatenate(out, axis=0)


def evaluate(model, dataset, indices=None, threshold=0.5, batch_size=100,
             subset=None):
    """FoldReport of the model on the rows `indices`."""
    indices = (np.arange(len(dataset)) if indices is None else
               np.asarray(indices, dtype=np.int64))
    prob = predict(model, dataset, indices, batch_size, subset)
    return FoldReport.from_predictions(prob, dataset.labels[indices],
                                       threshold, dataset.label_names)


def evaluate_loss(model, dataset, indices, weights, batch_size=100):
    """
    Infer-mode total loss over the rows `indices`, evaluated in chunks and
    normalized as one batch.
    """
    indices = np.asarray(indices, dtype=np.int64)
    weights = np.asarray(weights)
    data = 0.
    penalty = 0.
    for start in range(0, len(indices), int(batch_size)):
        rows = indices[start:start + batch_size]
        total, d = model.loss_and_grad(
            dataset.take(rows, model.config.modalities), dataset.labels[rows],
            weights[start:start + batch_size], 'infer', backward=False)
        data += d * len(rows)
        penalty = total - d
    return data / len(indices) + penalty


def _open_log(log, start_step):
    if log is None:
        return None, False
    if hasattr(log, 'write'):
        return log, False
    return open(log, 'a' if start_step > 0 else 'w'), True


def train(model, dataset, plan, weights=None, indices=None, validation=None,
          log=None, checkpoint_dir=None, optimizer=None, start_step=0,
          on_batch=None):
    """
    Optimize `model` on the rows `indices` of `dataset` for
    `plan.iterations` Adam steps.

    Parameters
    ----------
    model : Model
        Updated in place.
    dataset : Dataset
    plan : TrainPlan
    weights : array_like or None, optional
        Psi rows aligned with `indices`. Computed from the training labels if
        None.
    indices : array_like of int or None, optional
        Training rows. Uses every row if None.
    validation : array_like of int or None, optional
        Rows whose macro balanced accuracy is recorded; observational only.
    log : str, file-like or None, optional
        Receives one JSON record per line.
    checkpoint_dir : str or None, optional
        Overwritten with the model and Adam state at every record step.
    optimizer : Adam or None, optional
        Carries the Adam state of a resumed run.
    start_step : int, optional
        Number of steps already taken, for resuming.
    on_batch : callable or None, optional
        Called with every Batch before it is used.

    Returns
    -------
    TrainResult

    Raises
    ------
    NumericalError
        If the loss or a gradient becomes non-finite. The last checkpoint is
        left untouched.
    """
    if not isinstance(model, Model):
        raise ValueError('model should be a Model.')
    if not isinstance(plan, TrainPlan):
        raise ValueError('plan should be a TrainPlan.')
    indices = (np.arange(len(dataset)) if indices is None else
               np.asarray(indices, dtype=np.int64))
    if indices.size == 0:
        raise ValueError('there are no training instances.')
    if dataset.n_labels != model.config.label_count:
        raise ConfigError('the dataset has {} labels, the model {}.'.format(
            dataset.n_labels, model.config.label_count))
    if weights is None:
        weights = instance_weights(dataset.labels[indices], plan.weighting)
    if optimizer is None:
        optimizer = Adam(lr=plan.resolve_lr(model.config))
    start_step = int(start_step)
    if not 0 <= start_step <= plan.iterations:
        raise ValueError('start_step should be in [0, {}], instead of '
                         '{}.'.format(plan.iterations, start_step))
    seed = state_seed(plan.seed)
    batcher = Batcher(dataset, plan.batch_size, seed, indices, weights,
                      model.config.modalities, plan.prefetch)
    monitor = indices[:plan.monitor_size]
    monitor_weights = np.asarray(weights)[:plan.monitor_size]
    record_at = set(plan.record_steps(start_step))
    trace = TrainTrace()
    f, close = _open_log(log, start_step)
    t_0 = time.time()

    def record(step, batch_losses):
        val_ba = None
        if validation is not None and len(validation) > 0:
            ba = evaluate(model, dataset, validation, 0.5,
                          plan.batch_size).macro['ba']
            val_ba = None if np.isnan(ba) else ba
        rec = TrainRecord(
            step=step, wall_ms=1000. * (time.time() - t_0),
            loss=evaluate_loss(model, dataset, monitor, monitor_weights,
                               plan.batch_size),
            batch_loss=(float(np.mean(batch_losses)) if batch_losses else
                        None),
            val_ba=val_ba)
        trace.update(rec)
        if f is not None:
            f.write(TrainTrace.format_record(rec) + '\n')
            f.flush()
        if checkpoint_dir is not None and (step > start_step or step == 0):
            checkpoint_save(model, checkpoint_dir, step, seed, optimizer)

    n_run = plan.iterations - start_step
    n_update = max(n_run // 5, 1)
    last_saved = start_step if checkpoint_dir is not None else None
    try:
        with threadpool_limits(1):
            if start_step in record_at:
                record(start_step, [])
            losses = []
            t_i = time.time()
            for batch in batcher.iterate(start_step, plan.iterations):
                if on_batch is not None:
                    on_batch(batch)
                step = batch.step
                total, _ = model.loss_and_grad(
                    batch.inputs, batch.labels, batch.weights, 'train',
                    derive_state(seed, 1, step))
                if not np.isfinite(total):
                    raise NumericalError('the loss became {} at step '
                                         '{}.'.format(total, step + 1))
                optimizer.step(model.params, model.grads)
                losses.append(total)
                done = step + 1
                if done in record_at:
                    record(done, losses)
                    losses = []
                    if checkpoint_dir is not None:
                        last_saved = done
                if done > start_step and not (done - start_step) % n_update:
                    t_d = time.time() - t_i
                    t_i = time.time()
                    logger.info('training proceeding [ %d / %d ], last %d '
                                'steps used %.2f seconds', done,
                                plan.iterations, n_update, t_d)
    except NumericalError as e:
        if last_saved is not None:
            logger.error('training diverged (%s); the checkpoint of step %d '
                         'in %s is kept.', e, last_saved, checkpoint_dir)
        raise
    finally:
        if close:
            f.close()
    return TrainResult(model, trace, optimizer)

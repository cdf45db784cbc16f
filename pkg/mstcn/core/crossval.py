import itertools
import json
import logging
import os
from collections import namedtuple, OrderedDict
from .model import ModelConfig, ConfigError, build, canonical_modalities
from .train import TrainPlan, train, evaluate, instance_weights
from ..data.folds import FoldPlan, split_folds
from ..metrics.balanced import aggregate
from ..metrics.report import format_comparison, write_report
from ..utils.client import check_client, map_jobs
from ..utils.random import derive_state

__all__ = ['LeakageError', 'FoldOutcome', 'CVResult', 'AblationResult',
           'GRID_AXES', 'run_fold', 'run_cv', 'run_ablation', 'grid_cells',
           'subset_name', 'all_subsets']


logger = logging.getLogger(__name__)


class LeakageError(RuntimeError):
    """Raised when a test-fold user reaches a training batch."""
    pass


FoldOutcome = namedtuple('FoldOutcome', ['fold', 'report', 'subset_reports',
                                         'log_lines'])

CVResult = namedtuple('CVResult', ['fold_reports', 'summary',
                                   'subset_summaries', 'fold_plan'])

AblationResult = namedtuple('AblationResult', ['rows', 'table', 'results'])


GRID_AXES = ('fusion', 'conv_kind', 'modalities', 'weighting',
             'regularization', 'multi_task')


def subset_name(modalities):
    return '+'.join(canonical_modalities(modalities))


def all_subsets(modalities):
    """Every non-empty subset, by size and then in canonical order."""
    modalities = canonical_modalities(modalities)
    return [c for r in range(1, len(modalities) + 1) for c in
            itertools.combinations(modalities, r)]


def _audit(dataset, test_users):
    test_users = set(test_users)

    def on_batch(batch):
        leaked = test_users.intersection(dataset.users[batch.indices].tolist())
        if leaked:
            raise LeakageError('test-fold user(s) {} reached the training '
                               'batch of step {}.'.format(sorted(leaked),
                                                          batch.step))
    return on_batch


def run_fold(job):
    """
    Train from scratch on the training users of one fold and evaluate on its
    test users. `job` is a dict so that it can be shipped to a worker.
    """
    dataset = job['dataset']
    config = job['config']
    plan = job['plan']
    fold_plan = job['fold_plan']
    i = job['fold']
    test_users = fold_plan.test_users(i)
    if job.get('validation'):
        train_users, val_users = fold_plan.inner_split(i)
    else:
        train_users, val_users = fold_plan.train_users(i), []
    if set(train_users) & set(test_users):
        raise LeakageError('fold {} shares users between its training and '
                           'test sets.'.format(i))
    train_idx = dataset.user_indices(train_users)
    test_idx = dataset.user_indices(test_users)
    val_idx = dataset.user_indices(val_users) if val_users else None
    model = build(config, derive_state(plan.seed, 3, i))
    weights = instance_weights(dataset.labels[train_idx], plan.weighting)
    result = train(model, dataset, plan, weights, train_idx, val_idx,
                   on_batch=_audit(dataset, test_users))
    threshold = job.get('threshold', 0.5)
    report = evaluate(model, dataset, test_idx, threshold, plan.batch_size)
    subset_reports = OrderedDict()
    for s in job.get('subsets') or []:
        subset_reports[subset_name(s)] = evaluate(
            model, dataset, test_idx, threshold, plan.batch_size, s)
    logger.info('fold %d: macro ba %.3f on %d test instance(s)', i,
                report.macro['ba'], len(test_idx))
    return FoldOutcome(i, report, subset_reports, result.trace.lines())


def _resolve_subsets(config, subsets):
    if subsets is None:
        return []
    if not config.multi_task:
        raise ConfigError('modality subsets can only be evaluated with a '
                          'multi-task config.')
    if subsets == 'all':
        return all_subsets(config.modalities)
    out = [canonical_modalities(s) for s in subsets]
    extra = [s for s in out if not set(s) <= set(config.modalities)]
    if extra:
        raise ConfigError('subsets {} use modalities outside {}.'.format(
            extra, list(config.modalities)))
    return out


def run_cv(dataset, config, plan, k=5, fold_plan=None, threshold=0.5,
           client=None, subsets=None, validation=False, output=None):
    """
    User-grouped k-fold cross-validation, one fresh model per fold.

    Parameters
    ----------
    dataset : Dataset
    config : ModelConfig
    plan : TrainPlan
    k : int, optional
        Set to 5 by default. Ignored if `fold_plan` is given.
    fold_plan : FoldPlan or None, optional
        Drawn from `plan.seed` if None.
    threshold : float, optional
    client : Client, int, 'auto' or None, optional
        Where the folds run; see `check_client`.
    subsets : list, 'all' or None, optional
        Modality subsets to evaluate as well (multi-task configs only).
    validation : bool, optional
        Hold out the nested validation users of every fold and record their
        balanced accuracy during training.
    output : str or None, optional
        Directory receiving the per-fold and summary reports and logs.

    Returns
    -------
    CVResult
    """
    if not isinstance(config, ModelConfig):
        raise ValueError('config should be a ModelConfig.')
    if not isinstance(plan, TrainPlan):
        raise ValueError('plan should be a TrainPlan.')
    if dataset.n_labels != config.label_count:
        raise ConfigError('the dataset has {} labels, the config {}.'.format(
            dataset.n_labels, config.label_count))
    if fold_plan is None:
        fold_plan = split_folds(dataset.users, k, plan.seed)
    elif not isinstance(fold_plan, FoldPlan):
        raise ValueError('fold_plan should be a FoldPlan.')
    subsets = _resolve_subsets(config, subsets)
    jobs = [dict(dataset=dataset, config=config, plan=plan,
                 fold_plan=fold_plan, fold=i, threshold=threshold,
                 subsets=subsets, validation=validation)
            for i in range(fold_plan.k)]
    logger.info('cross-validating %r over %d fold(s)', config, fold_plan.k)
    outcomes = sorted(map_jobs(run_fold, jobs, client), key=lambda o: o.fold)
    reports = [o.report for o in outcomes]
    summary = aggregate(reports)
    subset_summaries = OrderedDict(
        (subset_name(s), aggregate([o.subset_reports[subset_name(s)] for o in
                                    outcomes])) for s in subsets)
    if output is not None:
        os.makedirs(output, exist_ok=True)
        for o in outcomes:
            write_report(o.report, output, 'fold{}'.format(o.fold))
            with open(os.path.join(output, 'fold{}.log'.format(o.fold)),
                      'w') as f:
                f.writelines(line + '\n' for line in o.log_lines)
        write_report(summary, output, 'summary')
        for name, s in subset_summaries.items():
            write_report(s, output, 'subset_' + name, subset=name)
        with open(os.path.join(output, 'folds.json'), 'w') as f:
            json.dump(fold_plan.to_dict(), f, indent=2)
            f.write('\n')
    logger.info('cross-validation done: macro ba %.3f', summary.macro['ba'])
    return CVResult(reports, summary, subset_summaries, fold_plan)


def _check_grid(grid):
    if not isinstance(grid, dict):
        raise ConfigError('grid should be a dict of axis -> list of values.')
    unknown = [a for a in grid if a not in GRID_AXES]
    if unknown:
        raise ConfigError('unknown grid axes {}, valid ones are {}.'.format(
            unknown, GRID_AXES))
    out = OrderedDict()
    for axis in GRID_AXES:
        if axis not in grid:
            continue
        values = grid[axis]
        if isinstance(values, (str, bool)) or not hasattr(values, '__iter__'):
            raise ConfigError('grid axis {} should list its values, instead '
                              'of {}.'.format(axis, values))
        values = list(values)
        if not values:
            raise ConfigError('grid axis {} is empty.'.format(axis))
        out[axis] = values
    return out


def _describe(axis, value):
    if axis == 'modalities':
        return subset_name(value)
    if axis in ('weighting', 'regularization', 'multi_task'):
        return 'on' if value else 'off'
    return str(value)


def grid_cells(grid, config, plan):
    """
    Expand a grid into `(descriptor, config, plan)` cells, axes in the order
    of `GRID_AXES`.
    """
    grid = _check_grid(grid)
    cells = []
    for values in itertools.product(*grid.values()):
        cfg = config
        pln = plan
        parts = []
        for axis, value in zip(grid, values):
            parts.append('{}={}'.format(axis, _describe(axis, value)))
            if axis in ('fusion', 'conv_kind', 'modalities'):
                cfg = cfg.replace(**{axis: value})
            elif axis == 'multi_task':
                cfg = cfg.replace(multi_task=bool(value))
            elif axis == 'weighting':
                pln = pln.replace(weighting=bool(value))
            elif axis == 'regularization':
                if not value:
                    cfg = cfg.replace(dropout=0., l1_rate=0., l2_rate=0.)
            else:
                raise RuntimeError('unexpected grid axis "{}".'.format(axis))
        cells.append((','.join(parts) or 'base', cfg, pln))
    return cells


def run_ablation(grid, dataset, config, plan, k=5, fold_plan=None,
                 threshold=0.5, client=None, output=None):
    """
    One cross-validation per grid cell, with the same folds and seeds in
    every cell.

    Returns
    -------
    AblationResult
        `rows` pairs each cell descriptor with its Summary, `table` is the
        comparison table and `results` maps descriptors to CVResult.
    """
    cells = grid_cells(grid, config, plan)
    if fold_plan is None:
        fold_plan = split_folds(dataset.users, k, plan.seed)
    client, _new_client = check_client(client)
    try:
        results = OrderedDict()
        for descriptor, cfg, pln in cells:
            logger.info('ablation cell %s', descriptor)
            cell_out = None
            if output is not None:
                cell_out = os.path.join(output, descriptor.replace(
                    ',', '__').replace('=', '-'))
            results[descriptor] = run_cv(dataset, cfg, pln, fold_plan.k,
                                         fold_plan, threshold, client,
                                         output=cell_out)
    finally:
        if _new_client:
            client.cluster.close()
            client.close()
    rows = [(d, r.summary) for d, r in results.items()]
    table = format_comparison(rows)
    if output is not None:
        os.makedirs(output, exist_ok=True)
        with open(os.path.join(output, 'comparison.tsv'), 'w') as f:
            f.write(table)
    return AblationResult(rows, table, results)

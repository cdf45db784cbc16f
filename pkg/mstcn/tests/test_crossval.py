import json
import os
import numpy as np
import pytest
from numpy.testing import assert_array_equal
from mstcn.core.crossval import (LeakageError, _audit, all_subsets,
                                 grid_cells, run_ablation, run_cv,
                                 subset_name)
from mstcn.core.model import MODALITIES, ConfigError
from mstcn.core.train import TrainPlan
from mstcn.data import Batcher, split_folds
from mstcn.utils import check_client, map_jobs
from .conftest import tiny_dataset

PLAN = TrainPlan(iterations=6, batch_size=8, eval_every=3, lr=1e-3)


def test_subsets():
    assert subset_name(['ps', 'acc']) == 'acc+ps'
    subsets = all_subsets(['acc', 'aud', 'ps'])
    assert len(subsets) == 7
    assert subsets[0] == ('acc',)
    assert subsets[-1] == ('acc', 'aud', 'ps')


def test_leakage_audit(dataset):
    on_batch = _audit(dataset, ['u002'])
    clean = Batcher(dataset, 5, 0, dataset.user_indices(['u000', 'u001']))
    on_batch(clean.batch(0))
    dirty = Batcher(dataset, 40, 0)
    with pytest.raises(LeakageError, match='u002'):
        on_batch(dirty.batch(0))


def test_run_cv(tmp_path, config, dataset):
    out = str(tmp_path)
    result = run_cv(dataset, config, PLAN, k=2, output=out)
    assert len(result.fold_reports) == 2
    assert result.summary.n_folds == 2
    assert result.fold_plan.k == 2
    for name in ('fold0.tsv', 'fold1.json', 'fold1.log', 'summary.tsv',
                 'summary.json', 'folds.json'):
        assert os.path.exists(os.path.join(out, name)), name
    with open(os.path.join(out, 'fold0.log')) as f:
        assert len(f.read().splitlines()) == 3
    with open(os.path.join(out, 'summary.json')) as f:
        assert json.load(f)['n_folds'] == 2
    again = run_cv(dataset, config, PLAN, fold_plan=result.fold_plan)
    assert_array_equal(again.summary.ba, result.summary.ba)
    n_test = sum(int(np.sum(r.n_present)) for r in result.fold_reports)
    assert n_test == int(np.sum(dataset.labels.present))


def test_run_cv_checks(config, dataset):
    with pytest.raises(ConfigError):
        run_cv(dataset, config.replace(label_count=3), PLAN, k=2)
    with pytest.raises(ConfigError):
        run_cv(dataset, config, PLAN, k=2, subsets='all')
    with pytest.raises(ValueError):
        run_cv(dataset, config, PLAN, fold_plan={'u000': 0})


def test_multitask_subsets(config, dataset):
    config = config.replace(multi_task=True, modalities=['acc', 'ps'])
    result = run_cv(dataset, config, PLAN, k=2, subsets='all',
                    validation=True)
    assert list(result.subset_summaries) == ['acc', 'ps', 'acc+ps']
    with pytest.raises(ConfigError):
        run_cv(dataset, config, PLAN, k=2, subsets=[['gyro']])


def test_grid_cells(config):
    cells = grid_cells({'weighting': [True, False], 'fusion': ['gmp', 'gap']},
                       config, PLAN)
    assert [c[0] for c in cells] == [
        'fusion=gmp,weighting=on', 'fusion=gmp,weighting=off',
        'fusion=gap,weighting=on', 'fusion=gap,weighting=off']
    assert cells[3][1].fusion == 'gap' and not cells[3][2].weighting
    (name, cfg, plan), = grid_cells({'regularization': [False]}, config, PLAN)
    assert name == 'regularization=off'
    assert cfg.dropout == cfg.l1_rate == cfg.l2_rate == 0.
    assert grid_cells({}, config, PLAN)[0][0] == 'base'
    (name, cfg, _), = grid_cells({'modalities': [['ps', 'gyro']]}, config,
                                 PLAN)
    assert name == 'modalities=gyro+ps' and cfg.modalities == ('gyro', 'ps')
    for bad in ({'depth': [1]}, {'fusion': 'gmp'}, {'fusion': []}):
        with pytest.raises(ConfigError):
            grid_cells(bad, config, PLAN)


def test_ablation_of_one_cell(tmp_path, config, dataset):
    folds = split_folds(dataset.users, 2, 0)
    ablation = run_ablation({'fusion': ['gap']}, dataset, config, PLAN,
                            fold_plan=folds, output=str(tmp_path))
    direct = run_cv(dataset, config.replace(fusion='gap'), PLAN,
                    fold_plan=folds)
    (descriptor, summary), = ablation.rows
    assert descriptor == 'fusion=gap'
    assert_array_equal(summary.ba, direct.summary.ba)
    with open(os.path.join(str(tmp_path), 'comparison.tsv')) as f:
        assert f.read() == ablation.table
    assert os.path.exists(os.path.join(str(tmp_path), 'fusion-gap',
                                       'summary.tsv'))


def _square(x):
    return x * x


def test_map_jobs():
    assert check_client(None) == (None, False)
    assert map_jobs(_square, [1, 2, 3]) == [1, 4, 9]
    with pytest.raises(ValueError):
        check_client('many')


@pytest.mark.slow
def test_folds_on_local_cluster(config, dataset):
    serial = run_cv(dataset, config, PLAN, k=2)
    parallel = run_cv(dataset, config, PLAN, k=2, client=2)
    assert_array_equal(serial.summary.ba, parallel.summary.ba)


@pytest.mark.slow
def test_cv_on_planted_data(config):
    dataset = tiny_dataset(n_users=4, n_instances=600, noise=0.5,
                           positive_rate=0.3)
    plan = TrainPlan(iterations=800, batch_size=50, eval_every=400, lr=1e-3)
    result = run_cv(dataset, config, plan, k=2)
    assert result.summary.macro['ba'] >= 0.9


@pytest.mark.slow
def test_multitask_serves_every_subset(config):
    dataset = tiny_dataset(n_users=4, n_instances=600, noise=0.3,
                           positive_rate=0.3)
    plan = TrainPlan(iterations=800, batch_size=50, eval_every=400, lr=1e-3)
    result = run_cv(dataset, config.replace(multi_task=True), plan, k=2,
                    subsets='all')
    ba = {name: s.macro['ba'] for name, s in
          result.subset_summaries.items()}
    assert len(ba) == 15
    for name, value in ba.items():
        assert value > 0.55, name
    full = ba[subset_name(MODALITIES)]
    for m in MODALITIES:
        assert full >= ba[m] - 0.05, m


@pytest.mark.slow
def test_modalities_complement_each_other(config):
    # each label is planted in one modality only
    dataset = tiny_dataset(n_users=4, n_instances=400, noise=0.5,
                           positive_rate=0.3, layout='complementary')
    plan = TrainPlan(iterations=600, batch_size=50, eval_every=300, lr=1e-3)
    grid = {'modalities': [[m] for m in MODALITIES] + [list(MODALITIES)]}
    ablation = run_ablation(grid, dataset, config, plan, k=2)
    ba = [summary.macro['ba'] for _, summary in ablation.rows]
    assert len(ba) == 5
    assert ba[-1] >= max(ba[:-1]) - 0.05

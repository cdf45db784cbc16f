import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from mstcn.core.checkpoint import read_checkpoint
from mstcn.core.model import ConfigError, ModelConfig, build
from mstcn.core.tensor import NumericalError
from mstcn.core.train import (TrainPlan, evaluate, evaluate_loss,
                              instance_weights, predict, train)
from mstcn.data import Dataset, SynthSpec, preprocess, synth_instances
from mstcn.metrics import FoldReport
from mstcn.optimizers import Adam, read_log
from .conftest import tiny_config, tiny_dataset


def _params_equal(a, b):
    assert list(a.params) == list(b.params)
    for k in a.params:
        assert_array_equal(a.params[k], b.params[k], err_msg=k)


def test_plan():
    plan = TrainPlan(iterations=10, eval_every=4)
    assert plan.record_steps() == [0, 4, 8, 10]
    assert plan.record_steps(4) == [8, 10]
    assert plan.record_steps(10) == []
    assert TrainPlan.from_dict(plan.to_dict()) == plan
    assert plan.replace(seed=3).seed == 3
    assert plan.resolve_lr(ModelConfig()) == 1e-4
    assert plan.replace(lr=0.01).resolve_lr(ModelConfig()) == 0.01
    for bad in (dict(depth=2), dict(iterations=-1), dict(batch_size=0),
                dict(lr=0.), dict(eval_every=1.5)):
        with pytest.raises(ConfigError):
            TrainPlan(**bad)


def test_zero_iterations(config, dataset):
    model = build(config, 0)
    before = model.state_dict()
    result = train(model, dataset, TrainPlan(iterations=0, batch_size=8))
    for k, v in before.items():
        assert_array_equal(model.params[k], v)
    assert [r.step for r in result.trace.records] == [0]
    assert result.trace.last.batch_loss is None


def test_same_seed_same_run(config, dataset):
    plan = TrainPlan(iterations=12, batch_size=8, eval_every=4, lr=1e-3,
                     seed=4)
    a = train(build(config, 0), dataset, plan)
    b = train(build(config, 0), dataset, plan.replace(prefetch=2))
    assert a.trace.lines(False) == b.trace.lines(False)
    _params_equal(a.model, b.model)
    assert [r.step for r in a.trace.records] == [0, 4, 8, 12]
    c = train(build(config, 0), dataset, plan.replace(seed=5))
    assert c.trace.lines(False) != a.trace.lines(False)


def test_resume_is_equivalent(tmp_path, config, dataset):
    config = config.replace(dropout=0.3)
    plan = TrainPlan(iterations=12, batch_size=8, eval_every=3, lr=1e-3,
                     seed=1)
    full = train(build(config, 0), dataset, plan,
                 log=str(tmp_path / 'full.log'),
                 checkpoint_dir=str(tmp_path / 'full'))
    log = str(tmp_path / 'part.log')
    ckpt = str(tmp_path / 'part')
    train(build(config, 0), dataset, plan.replace(iterations=6), log=log,
          checkpoint_dir=ckpt)
    state = read_checkpoint(ckpt)
    assert state.step == 6
    adam = Adam()
    adam.load_state_dict(state.optimizer)
    resumed = train(state.model, dataset, plan, log=log, checkpoint_dir=ckpt,
                    optimizer=adam, start_step=state.step)
    assert [r.step for r in resumed.trace.records] == [9, 12]
    _params_equal(full.model, resumed.model)
    strip = lambda t: t.lines(include_wall=False)
    assert strip(read_log(log)) == strip(read_log(str(tmp_path /
                                                      'full.log')))
    assert read_checkpoint(ckpt).step == 12


def test_divergence_keeps_checkpoint(tmp_path, config, dataset):
    model = build(config, 0)
    plan = TrainPlan(iterations=10, batch_size=8, eval_every=2)

    def poison(batch):
        if batch.step == 5:
            model.params['output.weight'][0, 0] = np.nan

    with pytest.raises(NumericalError):
        train(model, dataset, plan, checkpoint_dir=str(tmp_path),
              on_batch=poison)
    state = read_checkpoint(str(tmp_path))
    assert state.step == 4
    assert np.all(np.isfinite(state.model.params['output.weight']))


def test_loss_decreases(config, dataset):
    plan = TrainPlan(iterations=60, batch_size=10, eval_every=60, lr=3e-3)
    result = train(build(config, 0), dataset, plan)
    loss = result.trace.loss
    assert loss[-1] < loss[0]


def test_validation_records(config, dataset):
    plan = TrainPlan(iterations=4, batch_size=8, eval_every=2)
    result = train(build(config, 0), dataset, plan, indices=np.arange(30),
                   validation=np.arange(30, 40))
    assert all(r.val_ba is None or 0. <= r.val_ba <= 1. for r in
               result.trace.records)
    assert all(r.batch_loss is not None for r in result.trace.records[1:])


def test_train_checks(config, dataset):
    with pytest.raises(ValueError):
        train(build(config, 0), dataset, TrainPlan(), indices=[])
    with pytest.raises(ConfigError):
        train(build(config.replace(label_count=5), 0), dataset, TrainPlan())
    with pytest.raises(ValueError):
        train(build(config, 0), dataset, TrainPlan(iterations=3),
              start_step=4)


def test_predict_and_evaluate(config, dataset):
    model = build(config, 0)
    prob = predict(model, dataset, batch_size=7)
    assert prob.shape == (40, 4) and prob.dtype == np.float64
    assert_allclose(prob[10:20], predict(model, dataset, range(10, 20)),
                    rtol=1e-6)
    report = evaluate(model, dataset, np.arange(40))
    assert isinstance(report, FoldReport)
    assert report.n_labels == 4
    with pytest.raises(ConfigError):
        predict(model, dataset, subset=['acc'])
    assert predict(model, dataset, subset=list(config.modalities)).shape == \
        (40, 4)
    w = instance_weights(dataset.labels, False)
    assert np.isfinite(evaluate_loss(model, dataset, np.arange(40), w, 16))


def test_predict_multitask(config, dataset):
    model = build(config.replace(multi_task=True), 0)
    full = predict(model, dataset)
    only_ps = predict(model, dataset, subset=['ps'])
    assert full.shape == only_ps.shape == (40, 4)
    assert not np.array_equal(full, only_ps)


def test_evaluate_loss_matches_one_batch(config, dataset):
    model = build(config, 0)
    rows = np.arange(20)
    w = instance_weights(dataset.labels[rows])
    whole = model.loss(dataset.take(rows, config.modalities),
                       dataset.labels[rows], w)
    assert evaluate_loss(model, dataset, rows, w, 5) == pytest.approx(whole,
                                                                      rel=1e-5)


@pytest.mark.slow
def test_memorization():
    spec = SynthSpec(n_users=4, n_instances=200, n_labels=8, seed=0)
    kept = [preprocess(i) for i in synth_instances(spec)]
    ds = Dataset.from_instances(kept, 8, spec.ps_width)
    config = ModelConfig(filters=(8, 16), shared_units=(128, 64),
                         label_count=8, ps_width=8)
    plan = TrainPlan(iterations=2000, batch_size=100, eval_every=500,
                     lr=1e-3)
    result = train(build(config, 0), ds, plan)
    assert evaluate(result.model, ds).macro['ba'] >= 0.95


@pytest.mark.slow
@pytest.mark.parametrize('seed', [0, 1, 2])
def test_weighting_recovers_rare_positives(seed):
    # at a 95/5 skew an unweighted loss settles on the negatives
    kw = dict(n_users=4, n_instances=800, positive_rate=0.05, noise=1.)
    train_set = tiny_dataset(seed=seed, **kw)
    test_set = tiny_dataset(seed=seed + 100, **kw)
    ba = {}
    for weighting in (True, False):
        plan = TrainPlan(iterations=400, batch_size=50, eval_every=200,
                         lr=1e-3, seed=seed, weighting=weighting)
        result = train(build(tiny_config(), seed), train_set, plan)
        ba[weighting] = evaluate(result.model, test_set).macro['ba']
    assert ba[True] >= 0.7
    assert ba[False] < ba[True]

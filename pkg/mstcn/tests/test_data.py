import os
import numpy as np
import pytest
from numpy.testing import assert_array_equal
from mstcn.data import (Batcher, DataError, Dataset, Discard, Instance,
                        SynthSpec, load_dataset, matched_filter_scores,
                        pad_or_truncate, preprocess, read_header,
                        save_dataset, split_folds, synth_generate,
                        synth_instances, tile_frames, FoldPlan)
from mstcn.core.objective import LabelMatrix
from mstcn.core.tensor import DimensionError
from .conftest import TINY_IMU, TINY_MFCC


def _raw(imu=30, frames=25, ps=(0, 1, 1), labels=(1, -1)):
    return Instance('x', 'u', np.ones((imu, 3)), np.ones((imu, 3)),
                    np.arange(frames * 13.).reshape(frames, 13),
                    np.array(ps), np.array(labels))


def test_pad_truncate_tile():
    x = np.arange(6.).reshape(3, 2)
    assert_array_equal(pad_or_truncate(x, 5)[3:], 0.)
    assert_array_equal(pad_or_truncate(x, 2), x[:2])
    t = tile_frames(x, 7)
    assert_array_equal(t[3:6], x)
    assert_array_equal(t[6], x[0])
    assert tile_frames(x, 2).shape == (2, 2)


def test_preprocess():
    out = preprocess(_raw(), 40, 50)
    assert out.acc.shape == (40, 3) and out.acc.dtype == np.float32
    assert_array_equal(out.acc[30:], 0.)
    assert out.mfcc.shape == (50, 13)
    assert_array_equal(out.mfcc[25], out.mfcc[0])
    assert out.ps.dtype == np.uint8
    short = preprocess(_raw(frames=19), 40, 50)
    assert short == Discard('x', 'mfcc_too_short')
    with pytest.raises(DataError):
        preprocess(_raw(ps=(0, 2, 1)), 40, 50)
    with pytest.raises(DataError):
        preprocess(_raw(), 40, 50, ps_width=4)
    bad = _raw()._replace(gyro=np.ones((30, 2)))
    with pytest.raises(DataError):
        preprocess(bad, 40, 50)
    with pytest.raises(DataError):
        preprocess(_raw(labels=(1, 2)), 40, 50)


def test_preprocess_is_idempotent():
    raw = synth_instances(SynthSpec(n_instances=60, n_labels=4,
                                    vary_lengths=True, imu_length=TINY_IMU,
                                    mfcc_length=TINY_MFCC, seed=4))
    n_kept = 0
    for inst in raw:
        once = preprocess(inst, TINY_IMU, TINY_MFCC)
        if isinstance(once, Discard):
            continue
        twice = preprocess(once, TINY_IMU, TINY_MFCC)
        for key in ('acc', 'gyro', 'mfcc', 'ps', 'labels'):
            a, b = getattr(once, key), getattr(twice, key)
            assert a.dtype == b.dtype
            assert_array_equal(a, b)
        n_kept += 1
    assert 0 < n_kept < len(raw)


def test_synth_positive_rates():
    rates = [0.05, 0.2, 0.5, 0.8]
    raw = synth_instances(SynthSpec(n_users=20, n_instances=10000,
                                    n_labels=4, positive_rate=rates,
                                    missing_rate=0.1, imu_length=TINY_IMU,
                                    mfcc_length=TINY_MFCC, seed=7))
    labels = LabelMatrix.from_codes(np.stack([r.labels for r in raw]))
    present = labels.present.sum(0)
    assert np.all(present >= 8000)
    observed = (labels.values * labels.present).sum(0) / present
    assert np.all(np.abs(observed - rates) < 0.02)


def test_synth_is_deterministic(tmp_path):
    spec = SynthSpec(n_users=3, n_instances=12, n_labels=4, seed=9,
                     imu_length=TINY_IMU, mfcc_length=TINY_MFCC)
    a, b = str(tmp_path / 'a'), str(tmp_path / 'b')
    synth_generate(spec, a)
    synth_generate(spec, b)
    for root, _, files in os.walk(a):
        for name in files:
            pa = os.path.join(root, name)
            pb = os.path.join(b, os.path.relpath(pa, a))
            with open(pa, 'rb') as fa, open(pb, 'rb') as fb:
                assert fa.read() == fb.read(), name
    other = SynthSpec(n_users=3, n_instances=12, n_labels=4, seed=10,
                      imu_length=TINY_IMU, mfcc_length=TINY_MFCC)
    assert not np.array_equal(synth_instances(spec)[0].acc,
                              synth_instances(other)[0].acc)


def test_synth_missing_rate(tmp_path):
    spec = SynthSpec(n_instances=50, n_labels=4, missing_rate=0.,
                     imu_length=TINY_IMU, mfcc_length=TINY_MFCC)
    report = synth_generate(spec, str(tmp_path))
    assert report.n_missing == 0
    assert list(report.positive_rates) == ['synthetic_{}'.format(c) for c in
                                           range(4)]
    full = SynthSpec(n_instances=50, n_labels=4, missing_rate=1.,
                     imu_length=TINY_IMU, mfcc_length=TINY_MFCC)
    assert all(np.all(i.labels == -1) for i in synth_instances(full))


def test_synth_validation():
    with pytest.raises(ValueError):
        SynthSpec(n_labels=8, imu_length=60)
    with pytest.raises(ValueError):
        SynthSpec(missing_rate=1.5)
    with pytest.raises(ValueError):
        SynthSpec(layout='mixed')
    with pytest.raises(ValueError):
        SynthSpec(n_labels=3, positive_rate=[0.1, 0.2])


def test_dataset_roundtrip(tmp_path):
    spec = SynthSpec(n_users=3, n_instances=10, n_labels=4, seed=1,
                     imu_length=TINY_IMU, mfcc_length=TINY_MFCC)
    path = str(tmp_path)
    synth_generate(spec, path)
    assert read_header(path) == (4, 4, ['synthetic_{}'.format(c) for c in
                                        range(4)])
    ds = load_dataset(path, TINY_IMU, TINY_MFCC)
    assert len(ds) == 10
    assert ds.acc.shape == (10, TINY_IMU, 3)
    assert ds.unique_users == ['u000', 'u001', 'u002']
    raw = synth_instances(spec)
    assert_array_equal(ds.labels.codes(), [i.labels for i in raw])
    assert_array_equal(ds.acc[3], raw[3].acc)
    out = str(tmp_path / 'copy')
    save_dataset(ds.instances(), out, ds.n_labels, ds.ps_width,
                 ds.label_names)
    again = load_dataset(out, TINY_IMU, TINY_MFCC)
    assert again.labels == ds.labels
    assert_array_equal(again.mfcc, ds.mfcc)


def test_short_sequences_are_discarded(tmp_path):
    spec = SynthSpec(n_instances=60, n_labels=4, vary_lengths=True,
                     imu_length=TINY_IMU, mfcc_length=TINY_MFCC)
    synth_generate(spec, str(tmp_path))
    short = sum(len(i.mfcc) < 20 for i in synth_instances(spec))
    assert short > 0
    with pytest.warns(RuntimeWarning, match='discarded'):
        ds = load_dataset(str(tmp_path), TINY_IMU, TINY_MFCC)
    assert len(ds) == 60 - short


def test_malformed_dataset(tmp_path):
    with pytest.raises(DataError):
        load_dataset(str(tmp_path))
    (tmp_path / 'dataset.json').write_text('{"format_version": 1}')
    with pytest.raises(DataError):
        read_header(str(tmp_path))


def test_dataset_access(dataset):
    assert len(dataset) == 40
    rows = dataset.user_indices(['u001'])
    assert_array_equal(rows, np.arange(1, 40, 4))
    inputs = dataset.take(rows[:3], ['aud', 'ps'])
    assert list(inputs) == ['aud', 'ps']
    assert inputs['aud'].shape == (3, TINY_MFCC, 13)
    sub = dataset.subset(rows)
    assert sub.unique_users == ['u001']
    with pytest.raises(ValueError):
        dataset.column('mag')
    with pytest.raises(DataError):
        Dataset(dataset.acc[:2], dataset.gyro, dataset.mfcc, dataset.ps,
                dataset.ids, dataset.users, dataset.labels)


def test_folds():
    users = ['u{}'.format(i) for i in range(11)] * 3
    plan = split_folds(users, 5, 3)
    tests = [plan.test_users(i) for i in range(5)]
    assert sorted(sum(tests, [])) == sorted(set(users))
    assert max(map(len, tests)) - min(map(len, tests)) <= 1
    for i in range(5):
        assert not set(plan.train_users(i)) & set(plan.test_users(i))
        train, val = plan.inner_split(i)
        assert not set(train) & set(val)
        assert sorted(train + val) == plan.train_users(i)
        assert len(val) == 2
        assert (train, val) == plan.inner_split(i)
    assert plan == split_folds(users, 5, 3)
    assert plan != split_folds(users, 5, 4)
    assert FoldPlan.from_dict(plan.to_dict()) == plan
    with pytest.raises(DataError):
        split_folds(['a', 'b'], 3)
    with pytest.raises(ValueError):
        split_folds(users, 1)


def test_batcher(dataset):
    rows = np.arange(5, 40)
    batcher = Batcher(dataset, 8, 7, rows)
    assert batcher.batches_per_epoch == 5
    seen = np.concatenate([b.indices for b in batcher.epoch(0)])
    assert sorted(seen.tolist()) == rows.tolist()
    assert len(batcher.batch(4).indices) == 3
    # random access and iteration agree
    a = [b.indices for b in batcher.iterate(3, 12)]
    for step, idx in zip(range(3, 12), a):
        assert_array_equal(idx, batcher.batch(step).indices)
    again = Batcher(dataset, 8, 7, rows, prefetch=2)
    for x, y in zip(a, again.iterate(3, 12)):
        assert_array_equal(x, y.indices)
    assert not np.array_equal(batcher.batch_indices(0),
                              batcher.batch_indices(5))
    other = Batcher(dataset, 8, 8, rows)
    assert not np.array_equal(batcher.batch_indices(0),
                              other.batch_indices(0))
    with pytest.raises(DataError):
        Batcher(dataset, 8, 0, [])


def test_batch_weights(dataset):
    w = np.arange(40 * 4.).reshape(40, 4)
    batch = Batcher(dataset, 5, 0, weights=w).batch(2)
    assert_array_equal(batch.weights, w[batch.indices])
    assert batch.labels == dataset.labels[batch.indices]
    with pytest.raises(ValueError):
        Batcher(dataset, 5, 0, weights=w[:3])


def _separable(scores, labels):
    for c in range(labels.n_labels):
        keep = labels.present[:, c]
        pos = scores[keep & (labels.values[:, c] == 1), c]
        neg = scores[keep & (labels.values[:, c] == 0), c]
        assert pos.size and neg.size
        assert pos.min() > neg.max(), c


def _full_size(**kwargs):
    spec = SynthSpec(n_users=4, n_instances=150, n_labels=8, seed=2,
                     **kwargs)
    kept = [preprocess(i) for i in synth_instances(spec)]
    return Dataset.from_instances(kept, 8, spec.ps_width)


def test_matched_filter_redundant():
    ds = _full_size(noise=0.5)
    _separable(matched_filter_scores(ds), ds.labels)


def test_matched_filter_complementary():
    ds = _full_size(noise=0., layout='complementary')
    _separable(matched_filter_scores(ds, 'complementary'), ds.labels)


def test_label_matrix():
    labels = LabelMatrix.from_nullable([[1, None], [0, 1]])
    assert_array_equal(labels.codes(), [[1, -1], [0, 1]])
    assert labels.to_nullable() == [[1, None], [0, 1]]
    with pytest.raises(DimensionError):
        LabelMatrix.from_nullable([[1], [0, 1]])

import json
import os
import numpy as np
import pytest
from numpy.testing import assert_array_equal
from mstcn.core.checkpoint import (CheckpointError, MANIFEST_NAME,
                                   checkpoint_load, checkpoint_save,
                                   read_checkpoint)
from mstcn.core.model import build
from mstcn.core.tensor import FormatError
from mstcn.optimizers import Adam
from mstcn.utils.random import check_state


def _edit_manifest(path, edit):
    mpath = os.path.join(path, MANIFEST_NAME)
    with open(mpath) as f:
        manifest = json.load(f)
    edit(manifest)
    with open(mpath, 'w') as f:
        json.dump(manifest, f)


def test_roundtrip(tmp_path, config):
    model = build(config, 3)
    path = str(tmp_path / 'ckpt')
    checkpoint_save(model, path, step=17, seed=5)
    state = read_checkpoint(path)
    assert state.step == 17 and state.seed == 5
    assert state.optimizer is None
    assert state.model.config == config
    assert list(state.model.params) == list(model.params)
    for k, p in model.params.items():
        assert_array_equal(state.model.params[k], p)
        assert state.model.params[k].dtype == p.dtype
    # saving over an existing checkpoint replaces it
    checkpoint_save(build(config, 4), path, step=18)
    assert read_checkpoint(path).step == 18
    assert not os.path.exists(path + '.tmp')


def test_multitask_roundtrip(tmp_path, config):
    model = build(config.replace(multi_task=True), 0)
    checkpoint_save(model, str(tmp_path))
    loaded = checkpoint_load(str(tmp_path))
    assert loaded.multi_task
    assert loaded.n_param == model.n_param


def test_optimizer_state(tmp_path, config):
    model = build(config, 0)
    adam = Adam(lr=1e-3)
    rs = check_state(0)
    grads = {k: rs.standard_normal(p.shape).astype(p.dtype) for k, p in
             model.params.items()}
    adam.step(model.params, grads)
    adam.step(model.params, grads)
    checkpoint_save(model, str(tmp_path), 2, 0, adam)
    state = read_checkpoint(str(tmp_path))
    resumed = Adam()
    resumed.load_state_dict(state.optimizer)
    assert resumed.t == 2 and resumed.lr == 1e-3
    for k in adam.m:
        assert_array_equal(resumed.m[k], adam.m[k])
        assert_array_equal(resumed.v[k], adam.v[k])
    # both continue identically
    adam.step(model.params, grads)
    resumed.step(state.model.params, grads)
    for k, p in model.params.items():
        assert_array_equal(state.model.params[k], p)


def test_shape_mismatch_names_parameter(tmp_path, config):
    path = str(tmp_path)
    checkpoint_save(build(config, 0), path)

    def edit(manifest):
        manifest['params'][0]['shape'][0] += 1
    _edit_manifest(path, edit)
    name = build(config, 0).block_names[0]
    with pytest.raises(CheckpointError, match=name):
        read_checkpoint(path)


def test_corrupt_checkpoints(tmp_path, config):
    path = str(tmp_path)
    with pytest.raises(CheckpointError):
        read_checkpoint(path)
    checkpoint_save(build(config, 0), path)
    _edit_manifest(path, lambda m: m.update(format_version=99))
    with pytest.raises(CheckpointError):
        read_checkpoint(path)
    checkpoint_save(build(config, 0), path)
    _edit_manifest(path, lambda m: m['config'].update(fusion='max'))
    with pytest.raises(CheckpointError):
        read_checkpoint(path)
    checkpoint_save(build(config, 0), path)
    _edit_manifest(path, lambda m: m['params'].pop())
    with pytest.raises(CheckpointError):
        read_checkpoint(path)
    checkpoint_save(build(config, 0), path)
    with open(os.path.join(path, 'params', 'output.bias.blob'), 'wb') as f:
        f.write(b'MSTC')
    with pytest.raises(FormatError):
        read_checkpoint(path)

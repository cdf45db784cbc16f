import json
import os
import shutil
import numpy as np
from collections import namedtuple, OrderedDict
from .tensor import FormatError, blob_save, blob_load
from .model import ModelConfig, ConfigError, build

__all__ = ['CheckpointError', 'CheckpointState', 'checkpoint_save',
           'checkpoint_load', 'read_checkpoint', 'FORMAT_VERSION',
           'MANIFEST_NAME']


FORMAT_VERSION = 1
MANIFEST_NAME = 'manifest.json'


class CheckpointError(FormatError):
    """Raised when a checkpoint directory is inconsistent or unreadable."""
    pass


CheckpointState = namedtuple('CheckpointState',
                             ['model', 'step', 'seed', 'optimizer', 'manifest'])


def _blob_name(prefix, name):
    return '{}/{}.blob'.format(prefix, name)


def checkpoint_save(model, path, step=0, seed=None, optimizer=None):
    """
    Write `model` (and optionally the Adam state) to the directory `path`.

    The directory holds `manifest.json` and one blob per array. It is first
    written next to `path` and then swapped in, so an interrupted save leaves
    the previous checkpoint in place.
    """
    path = os.path.abspath(path)
    tmp = path + '.tmp'
    if os.path.exists(tmp):
        shutil.rmtree(tmp)
    os.makedirs(os.path.join(tmp, 'params'))
    manifest = OrderedDict([
        ('format_version', FORMAT_VERSION),
        ('config', model.config.to_dict()),
        ('dtype', model.dtype.name),
        ('step', int(step)),
        ('seed', None if seed is None else int(seed)),
        ('params', []),
        ('optimizer', None),
    ])
    for name, p in model.params.items():
        fname = _blob_name('params', name)
        blob_save(os.path.join(tmp, fname), p)
        manifest['params'].append(OrderedDict(
            [('name', name), ('shape', list(p.shape)), ('file', fname)]))
    if optimizer is not None:
        state = optimizer.state_dict()
        os.makedirs(os.path.join(tmp, 'adam'))
        opt = OrderedDict((k, state[k]) for k in ('t', 'lr', 'beta1', 'beta2',
                                                   'eps'))
        for key in ('m', 'v'):
            files = []
            for name, a in state[key].items():
                fname = _blob_name('adam', '{}.{}'.format(key, name))
                blob_save(os.path.join(tmp, fname), a)
                files.append(OrderedDict([('name', name), ('file', fname)]))
            opt[key] = files
        manifest['optimizer'] = opt
    with open(os.path.join(tmp, MANIFEST_NAME), 'w') as f:
        json.dump(manifest, f, indent=2)
        f.write('\n')
    old = path + '.old'
    if os.path.exists(path):
        os.replace(path, old)
    os.replace(tmp, path)
    if os.path.exists(old):
        shutil.rmtree(old)
    return path


def _load_blob(path, fname, dtype, what):
    try:
        return blob_load(os.path.join(path, fname), dtype)
    except FileNotFoundError:
        raise CheckpointError('blob file {} of {} is missing.'.format(fname,
                                                                      what))
    except FormatError as e:
        raise CheckpointError('failed to read {}: {}'.format(what, e))


def read_checkpoint(path):
    """
    Load a checkpoint directory.

    Returns
    -------
    CheckpointState
        `optimizer` is the Adam state dict, or None if none was saved.
    """
    mpath = os.path.join(path, MANIFEST_NAME)
    try:
        with open(mpath) as f:
            manifest = json.load(f)
    except FileNotFoundError:
        raise CheckpointError('{} has no {}.'.format(path, MANIFEST_NAME))
    except ValueError:
        raise CheckpointError('{} is not valid JSON.'.format(mpath))
    if not isinstance(manifest, dict):
        raise CheckpointError('{} should hold a JSON object.'.format(mpath))
    version = manifest.get('format_version')
    if version != FORMAT_VERSION:
        raise CheckpointError('unknown checkpoint format version {}, expected '
                              '{}.'.format(version, FORMAT_VERSION))
    try:
        config = ModelConfig.from_dict(manifest['config'])
        dtype = np.dtype(manifest['dtype'])
        entries = manifest['params']
        step = int(manifest['step'])
    except ConfigError as e:
        raise CheckpointError('invalid model config in manifest: {}'.format(e))
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError('malformed manifest: {}'.format(e))
    model = build(config, 0, dtype)
    params = model.params
    names = [e.get('name') for e in entries]
    if sorted(names) != sorted(params):
        raise CheckpointError(
            'manifest parameters do not match the model: missing {}, '
            'unexpected {}.'.format(
                sorted(set(params) - set(names)),
                sorted(set(names) - set(params))))
    for e in entries:
        name = e['name']
        shape = tuple(e['shape'])
        if shape != params[name].shape:
            raise CheckpointError(
                'shape mismatch for parameter {}: manifest says {}, the model '
                'needs {}.'.format(name, shape, params[name].shape))
        value = _load_blob(path, e['file'], dtype,
                           'parameter {}'.format(name))
        if value.shape != shape:
            raise CheckpointError(
                'shape mismatch for parameter {}: blob holds {}, manifest says '
                '{}.'.format(name, value.shape, shape))
        params[name][...] = value
    optimizer = None
    if manifest.get('optimizer') is not None:
        opt = manifest['optimizer']
        try:
            optimizer = OrderedDict((k, opt[k]) for k in ('t', 'lr', 'beta1',
                                                          'beta2', 'eps'))
            for key in ('m', 'v'):
                optimizer[key] = OrderedDict()
                for e in opt[key]:
                    what = 'optimizer {} of {}'.format(key, e['name'])
                    a = _load_blob(path, e['file'], dtype, what)
                    if e['name'] not in params or (a.shape !=
                                                   params[e['name']].shape):
                        raise CheckpointError('{} does not match any '
                                              'parameter.'.format(what))
                    optimizer[key][e['name']] = a
        except (KeyError, TypeError) as e:
            raise CheckpointError('malformed optimizer state: {}'.format(e))
    return CheckpointState(model, step, manifest.get('seed'), optimizer,
                           manifest)


def checkpoint_load(path):
    """The model stored in a checkpoint directory."""
    return read_checkpoint(path).model

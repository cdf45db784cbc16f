import numpy as np
from collections import OrderedDict
from .module import Sequential
from .tensor import DimensionError, as_tensor
from .objective import (RegPolicy, weighted_masked_bce, multitask_loss,
                        regularization_penalty)
from ..modules.conv import ConvSpec, Conv1D, conv_layer
from ..modules.dense import Dense
from ..modules.activations import ReLU, open_unit, sigmoid
from ..modules.dropout import Dropout
from ..modules.pooling import GlobalMaxPool, GlobalAvgPool
from ..modules.shape import Concat, Flatten
from ..utils.random import check_state

__all__ = ['MODALITIES', 'TEMPORAL_MODALITIES', 'FUSIONS', 'CONV_KINDS',
           'ConfigError', 'ModelConfig', 'Model', 'SingleTaskModel',
           'MultiTaskModel', 'build', 'build_multitask', 'canonical_modalities']


MODALITIES = ('acc', 'gyro', 'aud', 'ps')
TEMPORAL_MODALITIES = ('acc', 'gyro', 'aud')
FUSIONS = ('gmp', 'gap', 'fc', 'flattened', 'conv')
CONV_KINDS = ('dps', 'standard')


class ConfigError(ValueError):
    """Raised when a model or run configuration is invalid."""
    pass


def canonical_modalities(modalities):
    """Validate a modality collection and return it in acc, gyro, aud, ps order."""
    if isinstance(modalities, str):
        modalities = [s.strip() for s in modalities.split(',') if s.strip()]
    try:
        modalities = list(modalities)
    except TypeError:
        raise ConfigError('modalities should be a sequence of str, instead of '
                          '{}.'.format(modalities))
    unknown = [m for m in modalities if m not in MODALITIES]
    if unknown:
        raise ConfigError('unknown modalities {}, valid ones are '
                          '{}.'.format(unknown, MODALITIES))
    if len(set(modalities)) != len(modalities):
        raise ConfigError('modalities {} contain duplicates.'.format(
            modalities))
    if not modalities:
        raise ConfigError('at least one modality is needed.')
    return tuple(m for m in MODALITIES if m in modalities)


def _positive_int(value, name):
    try:
        out = int(value)
        assert out >= 1 and out == value
    except (TypeError, ValueError, AssertionError):
        raise ConfigError('{} should be a positive int, instead of '
                          '{}.'.format(name, value))
    return out


def _int_tuple(value, name):
    try:
        value = tuple(value)
        assert len(value) >= 1
    except (TypeError, AssertionError):
        raise ConfigError('{} should be a non-empty sequence of positive ints, '
                          'instead of {}.'.format(name, value))
    return tuple(_positive_int(v, name) for v in value)


def _rate(value, name, upper=None):
    try:
        out = float(value)
        assert out >= 0. and (upper is None or out < upper)
    except (TypeError, ValueError, AssertionError):
        raise ConfigError('{} should be a float in [0, {}), instead of '
                          '{}.'.format(name, upper or 'inf', value))
    return out


class ModelConfig:
    """
    Declarative description of one multi-stream network.

    Parameters
    ----------
    modalities : sequence of str, optional
        Non-empty subset of `('acc', 'gyro', 'aud', 'ps')`, kept in that order.
    conv_kind : str, optional
        `'dps'` (depthwise-separable) or `'standard'` stream convolutions.
    fusion : str, optional
        How temporal streams become the shared-network input: `'gmp'`,
        `'gap'`, `'fc'`, `'flattened'` or `'conv'`.
    multi_task : bool, optional
        Build the missing-sensor network with one head per modality.
    label_count : int, optional
        Set to 51 by default.
    ps_width : int, optional
        Width of the binary phone-state vector. Set to 34 by default.

    Notes
    -----
    The remaining keyword arguments are the layer hyperparameters; see
    `ModelConfig.FIELDS` for the full list and defaults.
    """
    FIELDS = OrderedDict([
        ('modalities', MODALITIES),
        ('conv_kind', 'dps'),
        ('fusion', 'gmp'),
        ('multi_task', False),
        ('label_count', 51),
        ('ps_width', 34),
        ('imu_length', 800),
        ('imu_channels', 3),
        ('aud_length', 420),
        ('aud_channels', 13),
        ('imu_kernels', (64, 32)),
        ('aud_kernels', (8, 6)),
        ('strides', (2, 2)),
        ('filters', (32, 64)),
        ('ps_units', 64),
        ('fusion_fc_units', 128),
        ('fusion_conv_kernel', 8),
        ('fusion_conv_filters', 64),
        ('fusion_conv_stride', 2),
        ('shared_units', (2048, 1024)),
        ('task_units', 128),
        ('ps_task_units', 64),
        ('dropout', 0.2),
        ('l1_rate', 1e-4),
        ('l2_rate', 1e-4),
        ('head_weights', None),
    ])

    def __init__(self, **kwargs):
        unknown = [k for k in kwargs if k not in self.FIELDS]
        if unknown:
            raise ConfigError('unknown ModelConfig field(s) {}.'.format(
                sorted(unknown)))
        values = OrderedDict(self.FIELDS)
        values.update(kwargs)

        self.modalities = canonical_modalities(values['modalities'])
        if values['conv_kind'] not in CONV_KINDS:
            raise ConfigError('conv_kind should be "dps" or "standard", '
                              'instead of "{}".'.format(values['conv_kind']))
        self.conv_kind = values['conv_kind']
        if values['fusion'] not in FUSIONS:
            raise ConfigError('fusion should be one of {}, instead of '
                              '"{}".'.format(FUSIONS, values['fusion']))
        self.fusion = values['fusion']
        self.multi_task = bool(values['multi_task'])
        for key in ('label_count', 'ps_width', 'imu_length', 'imu_channels',
                    'aud_length', 'aud_channels', 'ps_units',
                    'fusion_fc_units', 'fusion_conv_kernel',
                    'fusion_conv_filters', 'fusion_conv_stride', 'task_units',
                    'ps_task_units'):
            setattr(self, key, _positive_int(values[key], key))
        for key in ('imu_kernels', 'aud_kernels', 'strides', 'filters',
                    'shared_units'):
            setattr(self, key, _int_tuple(values[key], key))
        if not (len(self.imu_kernels) == len(self.aud_kernels) ==
                len(self.strides) == len(self.filters)):
            raise ConfigError('imu_kernels, aud_kernels, strides and filters '
                              'should have the same length.')
        self.dropout = _rate(values['dropout'], 'dropout', 1.)
        self.l1_rate = _rate(values['l1_rate'], 'l1_rate')
        self.l2_rate = _rate(values['l2_rate'], 'l2_rate')
        self.head_weights = self._check_head_weights(values['head_weights'])

        if self.fusion == 'conv' and not self.temporal_modalities:
            raise ConfigError('fusion "conv" needs at least one of acc, gyro '
                              'and aud.')
        if self.multi_task:
            if self.fusion not in ('gmp', 'gap'):
                raise ConfigError('the multi-task network needs fusion "gmp" '
                                  'or "gap", instead of "{}".'.format(
                                      self.fusion))
            if (self.temporal_modalities and 'ps' in self.modalities and
                    self.filters[-1] != self.ps_units):
                raise ConfigError(
                    'the weight-shared layer needs filters[-1] == ps_units, '
                    'instead of {} and {}.'.format(self.filters[-1],
                                                   self.ps_units))

    def _check_head_weights(self, weights):
        if weights is None:
            return None
        try:
            weights = {str(k): float(v) for k, v in dict(weights).items()}
        except (TypeError, ValueError):
            raise ConfigError('head_weights should be a dict of modality -> '
                              'weight, instead of {}.'.format(weights))
        if any(k not in MODALITIES for k in weights):
            raise ConfigError('head_weights has unknown modalities {}.'.format(
                [k for k in weights if k not in MODALITIES]))
        if any(not v >= 0. for v in weights.values()):
            raise ConfigError('head_weights should be non-negative.')
        return weights

    @property
    def temporal_modalities(self):
        return tuple(m for m in self.modalities if m in TEMPORAL_MODALITIES)

    def kernels(self, modality):
        if modality in ('acc', 'gyro'):
            return self.imu_kernels
        elif modality == 'aud':
            return self.aud_kernels
        raise ValueError('modality "{}" has no convolutions.'.format(modality))

    def input_shape(self, modality):
        if modality in ('acc', 'gyro'):
            return (self.imu_length, self.imu_channels)
        elif modality == 'aud':
            return (self.aud_length, self.aud_channels)
        elif modality == 'ps':
            return (self.ps_width,)
        raise ValueError('unknown modality "{}".'.format(modality))

    def stream_shapes(self, modality):
        """(length, channels) after each stream convolution, same padding."""
        length, _ = self.input_shape(modality)
        shapes = []
        for stride, filters in zip(self.strides, self.filters):
            length = -(-length // stride)
            shapes.append((length, filters))
        return shapes

    @property
    def learning_rate(self):
        return 3e-4 if self.multi_task else 1e-4

    @property
    def reg_policy(self):
        return RegPolicy(self.l1_rate, self.l2_rate)

    def to_dict(self):
        out = OrderedDict()
        for key in self.FIELDS:
            value = getattr(self, key)
            out[key] = list(value) if isinstance(value, tuple) else value
        if self.head_weights is not None:
            out['head_weights'] = dict(self.head_weights)
        return out

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError('model config should be a dict, instead of '
                              '{}.'.format(type(d).__name__))
        return cls(**d)

    def replace(self, **changes):
        d = self.to_dict()
        d.update(changes)
        return ModelConfig(**d)

    def __eq__(self, other):
        if not isinstance(other, ModelConfig):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self):
        return 'ModelConfig(modalities={}, conv_kind="{}", fusion="{}", ' \
               'multi_task={})'.format(list(self.modalities), self.conv_kind,
                                       self.fusion, self.multi_task)


class Model:
    """
    Base class of the multi-stream networks.

    Parameters are owned by named blocks (see `block_names`); qualified
    parameter names are `<block>.<param>`. Subclasses implement the fusion and
    head topology.
    """
    def __init__(self, config, random_state=None, dtype=np.float32):
        if not isinstance(config, ModelConfig):
            raise ValueError('config should be a ModelConfig.')
        self._config = config
        self._dtype = np.dtype(dtype)
        self._blocks = OrderedDict()
        self.activations = OrderedDict()
        self._build(check_state(random_state))

    @property
    def config(self):
        return self._config

    @property
    def dtype(self):
        return self._dtype

    @property
    def blocks(self):
        return self._blocks

    @property
    def block_names(self):
        return list(self._blocks)

    @property
    def capture_names(self):
        """Keys of `activations` holding one row per instance."""
        return self.block_names

    @property
    def multi_task(self):
        return self._config.multi_task

    @property
    def reg_policy(self):
        return self._config.reg_policy

    def _collect(self, attr):
        out = OrderedDict()
        for block in self._blocks.values():
            out.update(getattr(block, attr))
        return out

    @property
    def params(self):
        return self._collect('params')

    @property
    def grads(self):
        return self._collect('grads')

    @property
    def penalties(self):
        return self._collect('penalties')

    @property
    def n_param(self):
        return int(sum(b.n_param for b in self._blocks.values()))

    def zero_grads(self):
        for block in self._blocks.values():
            block.zero_grads()

    def astype(self, dtype):
        for block in self._blocks.values():
            block.astype(dtype)
        self._dtype = np.dtype(dtype)
        return self

    def state_dict(self):
        return OrderedDict((k, np.copy(v)) for k, v in self.params.items())

    def load_state_dict(self, state):
        params = self.params
        missing = [k for k in params if k not in state]
        extra = [k for k in state if k not in params]
        if missing or extra:
            raise ValueError('state does not match the model parameters: '
                             'missing {}, unexpected {}.'.format(missing, extra))
        for k, p in params.items():
            v = np.asarray(state[k])
            if v.shape != p.shape:
                raise DimensionError('parameter {} should have shape {}, '
                                     'instead of {}.'.format(k, p.shape,
                                                             v.shape))
            p[...] = v

    def _add_block(self, name, layers):
        self._blocks[name] = Sequential(layers, name)

    def _run(self, name, x, mode, random_state, capture):
        out = self._blocks[name].forward(x, mode, random_state)
        if capture:
            self.activations[name] = out
        return out

    def _check_inputs(self, inputs, modalities):
        if not isinstance(inputs, dict):
            raise ValueError('inputs should be a dict of modality -> array.')
        missing = [m for m in modalities if m not in inputs]
        if missing:
            raise ValueError('inputs lack the modalities {} required by this '
                             'model.'.format(missing))
        out = OrderedDict()
        n_batch = None
        for m in modalities:
            x = as_tensor(inputs[m], self._dtype, what=m)
            expected = self._config.input_shape(m)
            if x.ndim != len(expected) + 1 or x.shape[1:] != expected:
                raise DimensionError('{} should have shape (B,) + {}, instead '
                                     'of {}.'.format(m, expected, x.shape))
            if n_batch is None:
                n_batch = x.shape[0]
            elif x.shape[0] != n_batch:
                raise DimensionError('all modalities should have the same '
                                     'batch size.')
            out[m] = x
        return out

    def _build_encoders(self, random_state):
        c = self._config
        kind = 'depthwise_separable' if c.conv_kind == 'dps' else 'standard'
        for m in c.modalities:
            if m == 'ps':
                self._add_block('ps_fc', [
                    Dense(c.ps_width, c.ps_units, random_state, self._dtype),
                    ReLU(), Dropout(c.dropout)])
                continue
            channels = c.input_shape(m)[1]
            for i, (k, s, f) in enumerate(zip(c.kernels(m), c.strides,
                                              c.filters)):
                spec = ConvSpec(k, channels, f, s, 'same', kind)
                self._add_block('{}_conv{}'.format(m, i + 1), [
                    conv_layer(spec, random_state, self._dtype), ReLU()])
                channels = f

    def _encode(self, x, mode, random_state, capture):
        feats = OrderedDict()
        for m, h in x.items():
            if m == 'ps':
                h = self._run('ps_fc', h, mode, random_state, capture)
            else:
                for i in range(len(self._config.filters)):
                    h = self._run('{}_conv{}'.format(m, i + 1), h, mode,
                                  random_state, capture)
            feats[m] = h
        return feats

    def _encode_backward(self, grads):
        dx = OrderedDict()
        for m, g in grads.items():
            if m == 'ps':
                g = self._blocks['ps_fc'].backward(g)
            else:
                for i in reversed(range(len(self._config.filters))):
                    g = self._blocks['{}_conv{}'.format(m, i + 1)].backward(g)
            dx[m] = g
        return dx

    def _random_state(self, mode, random_state):
        return check_state(random_state) if mode == 'train' else None

    def _build(self, random_state):
        raise NotImplementedError('Abstract Method.')

    def forward(self, inputs, mode='infer', random_state=None, capture=False):
        raise NotImplementedError('Abstract Method.')

    def loss_and_grad(self, inputs, labels, weights, mode='train',
                      random_state=None, backward=True):
        raise NotImplementedError('Abstract Method.')

    def loss(self, inputs, labels, weights, mode='infer', random_state=None):
        """Total loss without touching the gradients."""
        return self.loss_and_grad(inputs, labels, weights, mode, random_state,
                                  False)[0]


class SingleTaskModel(Model):
    """Streams, fusion and a shared head ending in one sigmoid output."""

    def _build(self, random_state):
        c = self._config
        self._build_encoders(random_state)
        width = 0
        temporal = c.temporal_modalities
        if c.fusion == 'conv':
            spec = ConvSpec(c.fusion_conv_kernel, c.filters[-1],
                            c.fusion_conv_filters, c.fusion_conv_stride)
            self._add_block('fusion_conv', [
                Concat(axis=1), Conv1D(spec, random_state, self._dtype),
                ReLU(), GlobalMaxPool()])
            width += c.fusion_conv_filters
        else:
            for m in temporal:
                length, filters = c.stream_shapes(m)[-1]
                if c.fusion == 'gmp':
                    self._add_block(m + '_pool', [GlobalMaxPool()])
                    width += filters
                elif c.fusion == 'gap':
                    self._add_block(m + '_pool', [GlobalAvgPool()])
                    width += filters
                elif c.fusion == 'fc':
                    self._add_block(m + '_fc', [
                        Flatten(), Dense(length * filters, c.fusion_fc_units,
                                         random_state, self._dtype),
                        ReLU(), Dropout(c.dropout)])
                    width += c.fusion_fc_units
                else:
                    self._add_block(m + '_flatten', [Flatten()])
                    width += length * filters
        if 'ps' in c.modalities:
            width += c.ps_units
        self._add_block('fusion', [Concat(axis=-1)])
        self._shared = []
        for i, units in enumerate(c.shared_units):
            name = 'shared_fc{}'.format(i + 1)
            self._add_block(name, [
                Dense(width, units, random_state, self._dtype), ReLU(),
                Dropout(c.dropout)])
            self._shared.append(name)
            width = units
        self._add_block('output', [Dense(width, c.label_count, random_state,
                                         self._dtype)])

    @property
    def _stream_suffix(self):
        return {'gmp': '_pool', 'gap': '_pool', 'fc': '_fc',
                'flattened': '_flatten'}[self._config.fusion]

    def fuse(self, feats, mode='infer', random_state=None, capture=False):
        """Turn encoded streams into the shared-network input vector."""
        c = self._config
        temporal = [m for m in c.temporal_modalities]
        parts = []
        if c.fusion == 'conv':
            parts.append(self._run('fusion_conv', [feats[m] for m in temporal],
                                   mode, random_state, capture))
        else:
            for m in temporal:
                parts.append(self._run(m + self._stream_suffix, feats[m], mode,
                                       random_state, capture))
        if 'ps' in c.modalities:
            parts.append(feats['ps'])
        return self._run('fusion', parts, mode, random_state, capture)

    def forward_logits(self, inputs, mode='infer', random_state=None,
                       capture=False):
        x = self._check_inputs(inputs, self._config.modalities)
        random_state = self._random_state(mode, random_state)
        if capture:
            self.activations = OrderedDict()
        feats = self._encode(x, mode, random_state, capture)
        h = self.fuse(feats, mode, random_state, capture)
        for name in self._shared:
            h = self._run(name, h, mode, random_state, capture)
        return self._run('output', h, mode, random_state, capture)

    def forward(self, inputs, mode='infer', random_state=None, capture=False):
        """Label probabilities, B x label_count."""
        prob = sigmoid(self.forward_logits(inputs, mode, random_state,
                                           capture))
        if capture:
            self.activations['output'] = prob
        return prob

    def backward(self, grad):
        """Backpropagate a gradient with respect to the output logits."""
        c = self._config
        g = self._blocks['output'].backward(grad)
        for name in reversed(self._shared):
            g = self._blocks[name].backward(g)
        parts = self._blocks['fusion'].backward(g)
        if not isinstance(parts, list):
            parts = [parts]
        temporal = c.temporal_modalities
        grads = OrderedDict()
        if c.fusion == 'conv':
            maps = self._blocks['fusion_conv'].backward(parts[0])
            if not isinstance(maps, list):
                maps = [maps]
            for m, gm in zip(temporal, maps):
                grads[m] = gm
        else:
            for m, gm in zip(temporal, parts):
                grads[m] = self._blocks[m + self._stream_suffix].backward(gm)
        if 'ps' in c.modalities:
            grads['ps'] = parts[-1]
        return self._encode_backward(grads)

    def loss_and_grad(self, inputs, labels, weights, mode='train',
                      random_state=None, backward=True):
        """
        Weighted masked cross-entropy plus regularization penalty.

        Returns `(total, data_loss)`. With `backward=True` the gradients of
        the total are left in `self.grads`.
        """
        if backward:
            self.zero_grads()
        logits = self.forward_logits(inputs, mode, random_state)
        data, grad = weighted_masked_bce(logits, labels, weights,
                                         from_logits=True)
        if backward:
            self.backward(grad)
        penalty = regularization_penalty(
            self.params, self.penalties, self.reg_policy,
            self.grads if backward else None)
        return data + penalty, data


class MultiTaskModel(Model):
    """
    Missing-sensor network: one path per modality through a weight-shared
    layer, a task layer and a sigmoid head. Any non-empty subset of the
    configured modalities can be served.
    """
    def _build(self, random_state):
        c = self._config
        self._last_subset = None
        self._build_encoders(random_state)
        for m in c.temporal_modalities:
            pool = GlobalMaxPool() if c.fusion == 'gmp' else GlobalAvgPool()
            self._add_block(m + '_pool', [pool])
        width = c.filters[-1] if c.temporal_modalities else c.ps_units
        shared = c.shared_units[-1]
        self._add_block('shared_fc', [
            Dense(width, shared, random_state, self._dtype), ReLU(),
            Dropout(c.dropout)])
        for m in c.modalities:
            units = c.ps_task_units if m == 'ps' else c.task_units
            self._add_block('task_' + m, [
                Dense(shared, units, random_state, self._dtype), ReLU(),
                Dropout(c.dropout)])
            self._add_block('head_' + m, [
                Dense(units, c.label_count, random_state, self._dtype)])

    @property
    def capture_names(self):
        # the shared layer sees the stacked batch, so it is captured per path
        names = []
        for name in self._blocks:
            if name == 'shared_fc':
                names.extend('shared_fc_' + m for m in self._config.modalities)
            else:
                names.append(name)
        return names

    def _subset(self, inputs, subset):
        if subset is None:
            if not isinstance(inputs, dict):
                raise ValueError('inputs should be a dict of modality -> '
                                 'array.')
            subset = [m for m in self._config.modalities if m in inputs]
            if not subset:
                raise ValueError('inputs hold none of the modalities {}.'.format(
                    list(self._config.modalities)))
        subset = canonical_modalities(subset)
        extra = [m for m in subset if m not in self._config.modalities]
        if extra:
            raise ValueError('modalities {} are not part of this model, which '
                             'has {}.'.format(extra,
                                              list(self._config.modalities)))
        return subset

    def forward_logits(self, inputs, mode='infer', random_state=None,
                       capture=False, subset=None):
        subset = self._subset(inputs, subset)
        x = self._check_inputs(inputs, subset)
        random_state = self._random_state(mode, random_state)
        if capture:
            self.activations = OrderedDict()
        feats = self._encode(x, mode, random_state, capture)
        reps = [self._run(m + '_pool', feats[m], mode, random_state, capture)
                if m != 'ps' else feats[m] for m in subset]
        # one weight object serves every modality: run it on the stacked batch
        h = self._run('shared_fc', np.concatenate(reps, axis=0), mode,
                      random_state, False)
        logits = OrderedDict()
        for m, hm in zip(subset, np.split(h, len(subset), axis=0)):
            if capture:
                self.activations['shared_fc_' + m] = hm
            t = self._run('task_' + m, hm, mode, random_state, capture)
            logits[m] = self._run('head_' + m, t, mode, random_state, capture)
        self._last_subset = subset
        return logits

    def forward(self, inputs, mode='infer', random_state=None, capture=False,
                subset=None):
        """Per-head probabilities, a dict modality -> B x label_count."""
        logits = self.forward_logits(inputs, mode, random_state, capture,
                                     subset)
        prob = OrderedDict((m, sigmoid(z)) for m, z in logits.items())
        if capture:
            for m, p in prob.items():
                self.activations['head_' + m] = p
        return prob

    def backward(self, grads):
        """Backpropagate per-head logit gradients, a dict modality -> array."""
        subset = self._last_subset
        if subset is None:
            raise RuntimeError('backward called without a matching '
                               'forward.')
        if set(grads) != set(subset):
            raise ValueError('grads should cover exactly the heads {} of the '
                             'last forward pass.'.format(list(subset)))
        g_shared = []
        for m in subset:
            g = self._blocks['head_' + m].backward(grads[m])
            g_shared.append(self._blocks['task_' + m].backward(g))
        g_rep = self._blocks['shared_fc'].backward(
            np.concatenate(g_shared, axis=0))
        streams = OrderedDict()
        for m, g in zip(subset, np.split(g_rep, len(subset), axis=0)):
            streams[m] = (self._blocks[m + '_pool'].backward(g) if m != 'ps'
                          else g)
        return self._encode_backward(streams)

    def loss_and_grad(self, inputs, labels, weights, mode='train',
                      random_state=None, backward=True, subset=None):
        """Sum of the per-head losses plus the penalty; see SingleTaskModel."""
        if backward:
            self.zero_grads()
        logits = self.forward_logits(inputs, mode, random_state, False, subset)
        data, grads = multitask_loss(logits, labels, weights, 0.,
                                     from_logits=True)
        if backward:
            self.backward(grads)
        penalty = regularization_penalty(
            self.params, self.penalties, self.reg_policy,
            self.grads if backward else None)
        return data + penalty, data

    def head_weights(self, subset):
        weights = self._config.head_weights or {}
        return np.array([weights.get(m, 1.) for m in subset])

    def predict_missing(self, inputs, subset, weights=None):
        """
        Average of the head probabilities over the modality subset.

        Parameters
        ----------
        inputs : dict
            Must hold every modality of `subset`; others are ignored.
        subset : sequence of str
            Non-empty; listed in any order.
        weights : dict or None, optional
            Per-modality averaging weights. Uses `config.head_weights`, or
            uniform weights if that is None too.
        """
        subset = self._subset(inputs, subset)
        if weights is None:
            w = self.head_weights(subset)
        else:
            w = np.array([float(dict(weights).get(m, 1.)) for m in subset])
        if not np.all(w >= 0.) or not np.sum(w) > 0.:
            raise ValueError('head weights should be non-negative with a '
                             'positive sum, instead of {}.'.format(w))
        prob = self.forward(inputs, 'infer', subset=subset)
        out = sum(wi * prob[m] for wi, m in zip(w, subset))
        return open_unit((out / np.sum(w)).astype(self._dtype))


def build(config, random_state=None, dtype=np.float32):
    """Xavier-initialized network for `config`, reproducible from the seed."""
    if not isinstance(config, ModelConfig):
        raise ValueError('config should be a ModelConfig.')
    if config.multi_task:
        return MultiTaskModel(config, random_state, dtype)
    return SingleTaskModel(config, random_state, dtype)


def build_multitask(config, random_state=None, dtype=np.float32):
    if not isinstance(config, ModelConfig):
        raise ValueError('config should be a ModelConfig.')
    if not config.multi_task:
        raise ConfigError('build_multitask needs a config with '
                          'multi_task=True.')
    return MultiTaskModel(config, random_state, dtype)

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from ..core.module import Layer
from ..core.tensor import DimensionError, matmul, xavier_init, check_finite

__all__ = ['ConvSpec', 'conv1d_forward', 'depthwise_conv1d_forward',
           'pointwise_conv1d_forward', 'dps_conv1d_forward', 'Conv1D',
           'DepthwiseConv1D', 'PointwiseConv1D', 'DepthwiseSeparableConv1D',
           'conv_layer', 'CONV_KINDS', 'PADDINGS']


CONV_KINDS = ('standard', 'depthwise', 'pointwise', 'depthwise_separable')
PADDINGS = ('same', 'valid')


class ConvSpec:
    """
    Geometry of one temporal convolution.

    Parameters
    ----------
    kernel : int
        Receptive field length k, in samples.
    in_channels : int
        Number of input channels M.
    filters : int
        Number of output filters F. Ignored (set to M) for depthwise kind.
    stride : int, optional
        Set to 1 by default.
    padding : str, optional
        `'same'` (zero padding, output length `ceil(L / stride)`) or
        `'valid'` (output length `floor((L - k) / stride) + 1`). Set to
        `'same'` by default.
    kind : str, optional
        One of `'standard'`, `'depthwise'`, `'pointwise'`,
        `'depthwise_separable'`. Set to `'standard'` by default.
    """
    def __init__(self, kernel, in_channels, filters=None, stride=1,
                 padding='same', kind='standard'):
        if kind not in CONV_KINDS:
            raise ValueError('kind should be one of {}, instead of '
                             '"{}".'.format(CONV_KINDS, kind))
        if padding not in PADDINGS:
            raise ValueError('padding should be "same" or "valid", instead '
                             'of "{}".'.format(padding))
        try:
            kernel = int(kernel)
            stride = int(stride)
            in_channels = int(in_channels)
            filters = in_channels if kind == 'depthwise' else int(filters)
            assert min(kernel, stride, in_channels, filters) >= 1
        except (TypeError, ValueError, AssertionError):
            raise ValueError('kernel, stride, in_channels and filters should '
                             'be positive ints.')
        if kind == 'pointwise' and kernel != 1:
            raise ValueError('pointwise convolution should have kernel 1, '
                             'instead of {}.'.format(kernel))
        self._kernel = kernel
        self._stride = stride
        self._in_channels = in_channels
        self._filters = filters
        self._padding = padding
        self._kind = kind

    @property
    def kernel(self):
        return self._kernel

    @property
    def stride(self):
        return self._stride

    @property
    def in_channels(self):
        return self._in_channels

    @property
    def filters(self):
        return self._filters

    @property
    def padding(self):
        return self._padding

    @property
    def kind(self):
        return self._kind

    def output_length(self, length):
        return _geometry(length, self._kernel, self._stride, self._padding)[0]

    @property
    def n_param(self):
        k, m, f = self._kernel, self._in_channels, self._filters
        if self._kind == 'standard':
            return k * m * f + f
        elif self._kind == 'depthwise':
            return k * m
        elif self._kind == 'pointwise':
            return m * f + f
        else:
            return k * m + m * f + f

    def replace(self, **changes):
        kw = dict(kernel=self._kernel, in_channels=self._in_channels,
                  filters=self._filters, stride=self._stride,
                  padding=self._padding, kind=self._kind)
        kw.update(changes)
        return ConvSpec(**kw)

    def __repr__(self):
        return ('ConvSpec(kernel={}, in_channels={}, filters={}, stride={}, '
                'padding="{}", kind="{}")'.format(
                    self._kernel, self._in_channels, self._filters,
                    self._stride, self._padding, self._kind))


def _geometry(length, kernel, stride, padding):
    if padding == 'same':
        n_out = -(-length // stride)
        total = max((n_out - 1) * stride + kernel - length, 0)
        return n_out, total // 2, total - total // 2
    if length < kernel:
        raise DimensionError('input length {} is shorter than kernel {} under '
                             'valid padding.'.format(length, kernel))
    return (length - kernel) // stride + 1, 0, 0


def _batched(x, channels=None, what='x'):
    x = np.asarray(x)
    if x.ndim == 2:
        x, squeeze = x[np.newaxis], True
    elif x.ndim == 3:
        squeeze = False
    else:
        raise DimensionError('{} should be L x M or B x L x M, instead of '
                             'shape {}.'.format(what, x.shape))
    if channels is not None and x.shape[-1] != channels:
        raise DimensionError('{} has {} channels, but the weights expect '
                             '{}.'.format(what, x.shape[-1], channels))
    return x, squeeze


def _windows(x, kernel, stride, padding):
    # x: B x L x M  ->  B x L' x M x k (a strided view)
    n_out, left, right = _geometry(x.shape[1], kernel, stride, padding)
    if left or right:
        x = np.pad(x, ((0, 0), (left, right), (0, 0)))
    win = sliding_window_view(x, kernel, axis=1)[:, ::stride][:, :n_out]
    return win, (left, x.shape[1])


def _unwindow(dwin, stride, geometry, length):
    left, padded = geometry
    b, n_out, m, k = dwin.shape
    dx = np.zeros((b, padded, m), dtype=dwin.dtype)
    span = stride * (n_out - 1) + 1
    for j in range(k):
        dx[:, j:j + span:stride, :] += dwin[:, :, :, j]
    return dx[:, left:left + length]


def conv1d_forward(x, w, b, stride=1, padding='same'):
    """
    Standard 1-d convolution.

    out[i, f] = b[f] + sum_j sum_m x[i * stride + j - pad, m] * w[j, m, f],
    with zeros outside the input for same padding.

    Parameters
    ----------
    x : array_like, shape (L, M) or (B, L, M)
    w : array_like, shape (k, M, F)
    b : array_like, shape (F,)
    """
    w = np.asarray(w)
    b = np.asarray(b)
    if w.ndim != 3 or b.shape != (w.shape[2],):
        raise DimensionError('conv weights should be k x M x F with an F '
                             'bias, instead of {} and {}.'.format(w.shape,
                                                                  b.shape))
    xb, squeeze = _batched(x, w.shape[1])
    win, _ = _windows(xb, w.shape[0], stride, padding)
    out = np.tensordot(win, w, axes=([2, 3], [1, 0])) + b
    return out[0] if squeeze else out


def depthwise_conv1d_forward(x, w_d, stride=1, padding='same'):
    """
    Per-channel convolution: out[i, m] = sum_j x[i * stride + j - pad, m] *
    w_d[j, m]. Channel m of the output depends only on channel m of the input.
    """
    w_d = np.asarray(w_d)
    if w_d.ndim != 2:
        raise DimensionError('depthwise weights should be k x M, instead of '
                             '{}.'.format(w_d.shape))
    xb, squeeze = _batched(x, w_d.shape[1])
    win, _ = _windows(xb, w_d.shape[0], stride, padding)
    out = np.einsum('blmk,km->blm', win, w_d)
    return out[0] if squeeze else out


def pointwise_conv1d_forward(x, w_p, b):
    """1 x 1 convolution, i.e. the per-timestep affine map x[i] @ w_p + b."""
    w_p = np.asarray(w_p)
    b = np.asarray(b)
    if w_p.ndim != 2 or b.shape != (w_p.shape[1],):
        raise DimensionError('pointwise weights should be M x F with an F '
                             'bias, instead of {} and {}.'.format(w_p.shape,
                                                                  b.shape))
    xb, squeeze = _batched(x, w_p.shape[0])
    bsz, length, m = xb.shape
    out = (matmul(xb.reshape(bsz * length, m), w_p) + b).reshape(
        bsz, length, -1)
    return out[0] if squeeze else out


def dps_conv1d_forward(x, w_d, w_p, b, stride=1, padding='same'):
    """Depthwise-separable convolution: pointwise after depthwise."""
    return pointwise_conv1d_forward(
        depthwise_conv1d_forward(x, w_d, stride, padding), w_p, b)


class _ConvBase(Layer):

    def __init__(self, spec, name=None):
        super().__init__(name)
        if not isinstance(spec, ConvSpec):
            raise ValueError('spec should be a ConvSpec.')
        self._spec = spec

    @property
    def spec(self):
        return self._spec


class Conv1D(_ConvBase):
    """Standard convolution layer with kernel `k x M x F` and bias `F`."""

    def __init__(self, spec, random_state, dtype=np.float32, name=None,
                 penalty='l2'):
        super().__init__(spec, name)
        if spec.kind != 'standard':
            raise ValueError('Conv1D needs a standard ConvSpec.')
        k, m, f = spec.kernel, spec.in_channels, spec.filters
        self._add_param('kernel', xavier_init(k * m, k * f, random_state,
                                              (k, m, f), dtype), penalty)
        self._add_param('bias', np.zeros(f, dtype))

    def _forward(self, x, mode, random_state):
        s = self._spec
        xb, squeeze = _batched(x, s.in_channels)
        win, geometry = _windows(xb, s.kernel, s.stride, s.padding)
        out = (np.tensordot(win, self._params['kernel'], axes=([2, 3], [1, 0]))
               + self._params['bias'])
        cache = (win, geometry, xb.shape[1], squeeze)
        return (out[0] if squeeze else out), cache

    def _backward(self, grad, cache):
        win, geometry, length, squeeze = cache
        g = grad[np.newaxis] if squeeze else grad
        self._grads['kernel'][...] = np.tensordot(
            win, g, axes=([0, 1], [0, 1])).transpose(1, 0, 2)
        self._grads['bias'][...] = g.sum(axis=(0, 1))
        dwin = np.tensordot(g, self._params['kernel'],
                            axes=([2], [2])).transpose(0, 1, 3, 2)
        dx = _unwindow(dwin, self._spec.stride, geometry, length)
        return dx[0] if squeeze else dx


class DepthwiseConv1D(_ConvBase):
    """Per-channel convolution with kernel `k x M` and no bias."""

    def __init__(self, spec, random_state, dtype=np.float32, name=None,
                 penalty='l2'):
        super().__init__(spec, name)
        if spec.kind not in ('depthwise', 'depthwise_separable'):
            raise ValueError('DepthwiseConv1D needs a depthwise ConvSpec.')
        k, m = spec.kernel, spec.in_channels
        self._add_param('depthwise', xavier_init(k * m, k, random_state,
                                                 (k, m), dtype), penalty)

    def _forward(self, x, mode, random_state):
        s = self._spec
        xb, squeeze = _batched(x, s.in_channels)
        win, geometry = _windows(xb, s.kernel, s.stride, s.padding)
        out = np.einsum('blmk,km->blm', win, self._params['depthwise'])
        return (out[0] if squeeze else out), (win, geometry, xb.shape[1],
                                              squeeze)

    def _backward(self, grad, cache):
        win, geometry, length, squeeze = cache
        g = grad[np.newaxis] if squeeze else grad
        self._grads['depthwise'][...] = np.einsum('blmk,blm->km', win, g)
        dwin = g[..., np.newaxis] * self._params['depthwise'].T
        dx = _unwindow(dwin, self._spec.stride, geometry, length)
        return dx[0] if squeeze else dx


class PointwiseConv1D(_ConvBase):
    """1 x 1 convolution with weights `M x F` and bias `F`."""

    def __init__(self, spec, random_state, dtype=np.float32, name=None,
                 penalty=None):
        super().__init__(spec, name)
        m, f = spec.in_channels, spec.filters
        self._add_param('pointwise', xavier_init(m, f, random_state,
                                                 dtype=dtype), penalty)
        self._add_param('bias', np.zeros(f, dtype))

    def _forward(self, x, mode, random_state):
        xb, squeeze = _batched(x, self._spec.in_channels)
        out = pointwise_conv1d_forward(xb, self._params['pointwise'],
                                       self._params['bias'])
        return (out[0] if squeeze else out), (xb, squeeze)

    def _backward(self, grad, cache):
        xb, squeeze = cache
        g = grad[np.newaxis] if squeeze else grad
        bsz, length, m = xb.shape
        g2 = g.reshape(bsz * length, -1)
        self._grads['pointwise'][...] = matmul(xb.reshape(bsz * length, m).T,
                                               g2)
        self._grads['bias'][...] = g2.sum(axis=0)
        dx = matmul(g2, self._params['pointwise'].T).reshape(xb.shape)
        return dx[0] if squeeze else dx


class DepthwiseSeparableConv1D(_ConvBase):
    """
    Depthwise convolution followed by a pointwise projection.

    Parameters are `depthwise` (`k x M`, no bias), `pointwise` (`M x F`) and
    `bias` (`F`). The forward pass is exactly the composition of the two
    component layers.
    """
    def __init__(self, spec, random_state, dtype=np.float32, name=None,
                 penalty='l2'):
        super().__init__(spec, name)
        if spec.kind != 'depthwise_separable':
            raise ValueError('DepthwiseSeparableConv1D needs a '
                             'depthwise_separable ConvSpec.')
        self._depthwise = DepthwiseConv1D(spec, random_state, dtype,
                                          penalty=penalty)
        self._pointwise = PointwiseConv1D(
            ConvSpec(1, spec.in_channels, spec.filters, kind='pointwise'),
            random_state, dtype)
        # the component layers own the arrays; expose them under one name
        self._params = self._depthwise.params.copy()
        self._params.update(self._pointwise.params)
        self._grads = self._depthwise.grads.copy()
        self._grads.update(self._pointwise.grads)
        self._penalties = self._depthwise.penalties.copy()
        self._penalties.update(self._pointwise.penalties)

    def _forward(self, x, mode, random_state):
        h = self._depthwise.forward(x, mode)
        return self._pointwise.forward(h, mode), True

    def _backward(self, grad, cache):
        return self._depthwise.backward(self._pointwise.backward(grad))

    def astype(self, dtype):
        self._depthwise.astype(dtype)
        self._pointwise.astype(dtype)
        for src in (self._depthwise, self._pointwise):
            self._params.update(src.params)
            self._grads.update(src.grads)
        self._cache = None
        return self


def conv_layer(spec, random_state, dtype=np.float32, name=None):
    if spec.kind == 'standard':
        return Conv1D(spec, random_state, dtype, name)
    elif spec.kind == 'depthwise':
        return DepthwiseConv1D(spec, random_state, dtype, name)
    elif spec.kind == 'pointwise':
        return PointwiseConv1D(spec, random_state, dtype, name)
    elif spec.kind == 'depthwise_separable':
        return DepthwiseSeparableConv1D(spec, random_state, dtype, name)
    raise RuntimeError('unexpected value of spec.kind "{}".'.format(spec.kind))
